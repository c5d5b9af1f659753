//! Seeded random programs and selectors.

use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fixtures::Fixture;

pub const HELPERS_FILE: &str = "gen_helpers.py";
pub const MAIN_FILE: &str = "gen_main.py";

const TARGETS: [&str; 3] = ["a", "b", "c"];

struct ProgramGen {
    rng: ChaCha8Rng,
    out: String,
    /// Index of the helper being written; `None` while writing main.
    current: Option<usize>,
    helpers: usize,
    with_rec: bool,
    /// Readable names besides a, b, c and xs (loop variables in scope).
    extra: Vec<String>,
    loop_depth: usize,
    next_loop: usize,
    stmts_left: usize,
}

/// A random, terminating program over two files whose entry is `main`.
/// Roughly one program in twenty stops with a division by zero.
pub fn program(seed: u64) -> Fixture {
    let mut g = ProgramGen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        out: String::new(),
        current: None,
        helpers: 0,
        with_rec: false,
        extra: Vec::new(),
        loop_depth: 0,
        next_loop: 0,
        stmts_left: 0,
    };
    g.helpers = g.rng.gen_range(0..=3);
    g.with_rec = g.rng.gen_bool(0.4);
    let faulty = g.rng.gen_bool(0.05);

    let mut helpers = String::new();
    for k in 0..g.helpers {
        g.current = Some(k);
        g.out.clear();
        g.function(&format!("g{k}(a, b)"), "    c = a + 1\n    xs = [a, b]\n", false);
        helpers.push_str(&g.out);
        helpers.push('\n');
    }
    if g.with_rec {
        helpers.push_str("def rec(n):\n    if n <= 0:\n        return 0\n    return n + rec(n - 1)\n\n");
    }
    g.current = None;
    g.out.clear();
    let (x, y) = (g.rng.gen_range(-5..20), g.rng.gen_range(-5..20));
    let prelude = format!("    a = {x}\n    b = {y}\n    c = 0\n    xs = [a, b, 3]\n");
    g.function("main()", &prelude, faulty);
    let mut main = std::mem::take(&mut g.out);
    let top_level = g.rng.gen_bool(0.5);
    if top_level {
        main.push_str("\nmain()\n");
    }
    if helpers.is_empty() {
        return Fixture {
            name: "generated",
            files: vec![(MAIN_FILE, main)],
            entry: "main",
            data: None,
        };
    }
    Fixture {
        name: "generated",
        files: vec![(HELPERS_FILE, helpers), (MAIN_FILE, main)],
        entry: "main",
        data: None,
    }
}

impl ProgramGen {
    fn function(&mut self, header: &str, prelude: &str, faulty: bool) {
        writeln!(self.out, "def {header}:").unwrap();
        self.out.push_str(prelude);
        self.stmts_left = self.rng.gen_range(2..=10);
        self.extra.clear();
        self.next_loop = 0;
        if self.current.map_or(0, |k| k + 1) < self.helpers || self.with_rec {
            let call = self.call_expr();
            writeln!(self.out, "    c = {call}").unwrap();
        }
        let n = self.rng.gen_range(1..=4);
        self.block(1, n);
        if faulty {
            self.out.push_str("    c = a // (b - b)\n");
        }
        let ret = self.int_expr(1);
        writeln!(self.out, "    return ({ret}) % 97").unwrap();
    }

    fn indent(&mut self, level: usize) {
        for _ in 0..level {
            self.out.push_str("    ");
        }
    }

    fn block(&mut self, level: usize, n: usize) {
        for _ in 0..n {
            self.stmt(level);
        }
    }

    fn stmt(&mut self, level: usize) {
        let compound = self.stmts_left > 0 && self.loop_depth < 2;
        self.stmts_left = self.stmts_left.saturating_sub(1);
        let choice = self.rng.gen_range(0..if compound { 12 } else { 8 });
        match choice {
            0..=2 => {
                let t = *TARGETS.choose(&mut self.rng).unwrap();
                let e = self.int_expr(2);
                self.indent(level);
                writeln!(self.out, "{t} = ({e}) % 97").unwrap();
            }
            3 => {
                let e = self.int_expr(1);
                self.indent(level);
                if self.loop_depth == 0 || self.rng.gen_bool(0.5) {
                    writeln!(self.out, "xs = xs + [{e}]").unwrap();
                } else {
                    writeln!(self.out, "xs = [xs[0], {e}]").unwrap();
                }
            }
            4 => {
                self.indent(level);
                self.out.push_str("a, b = b, a\n");
            }
            5 => {
                let e = self.int_expr(1);
                self.indent(level);
                writeln!(self.out, "print({e}, xs)").unwrap();
            }
            6 => {
                let t = *TARGETS.choose(&mut self.rng).unwrap();
                let call = self.call_expr();
                self.indent(level);
                writeln!(self.out, "{t} = {call}").unwrap();
            }
            7 => {
                let t = *TARGETS.choose(&mut self.rng).unwrap();
                let e = self.int_expr(1);
                self.indent(level);
                writeln!(self.out, "{t} = xs[({e}) % len(xs)]").unwrap();
            }
            8 | 9 => {
                let cond = self.cond();
                self.indent(level);
                writeln!(self.out, "if {cond}:").unwrap();
                let n = self.rng.gen_range(1..=2);
                self.block(level + 1, n);
                if self.rng.gen_bool(0.3) {
                    let cond = self.cond();
                    self.indent(level);
                    writeln!(self.out, "elif {cond}:").unwrap();
                    self.block(level + 1, 1);
                }
                if self.rng.gen_bool(0.4) {
                    self.indent(level);
                    self.out.push_str("else:\n");
                    if self.rng.gen_bool(0.2) {
                        self.indent(level + 1);
                        self.out.push_str("pass\n");
                    } else {
                        self.block(level + 1, 1);
                    }
                }
            }
            10 => {
                let var = format!("i{}", self.next_loop);
                self.next_loop += 1;
                self.indent(level);
                if self.rng.gen_bool(0.7) {
                    let k = self.rng.gen_range(0..=4);
                    writeln!(self.out, "for {var} in range({k}):").unwrap();
                } else if self.loop_depth == 0 {
                    writeln!(self.out, "for {var} in xs:").unwrap();
                } else {
                    writeln!(self.out, "for {var} in [a, b]:").unwrap();
                }
                self.loop_body(level, var, None);
            }
            _ => {
                let var = format!("w{}", self.next_loop);
                self.next_loop += 1;
                let k = self.rng.gen_range(0..=4);
                self.indent(level);
                writeln!(self.out, "{var} = 0").unwrap();
                self.indent(level);
                writeln!(self.out, "while {var} < {k}:").unwrap();
                self.loop_body(level, var.clone(), Some(var));
            }
        }
    }

    fn loop_body(&mut self, level: usize, var: String, counter: Option<String>) {
        self.loop_depth += 1;
        self.extra.push(var);
        let n = self.rng.gen_range(1..=3);
        self.block(level + 1, n);
        if self.rng.gen_bool(0.1) {
            self.indent(level + 1);
            self.out.push_str("if c > 90:\n");
            self.indent(level + 2);
            self.out.push_str("return c\n");
        }
        if let Some(w) = counter {
            self.indent(level + 1);
            writeln!(self.out, "{w} = {w} + 1").unwrap();
        }
        self.extra.pop();
        self.loop_depth -= 1;
    }

    fn atom(&mut self) -> String {
        let mut names: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        names.extend(self.extra.iter().cloned());
        match self.rng.gen_range(0..10) {
            0..=4 => names.choose(&mut self.rng).unwrap().clone(),
            5..=6 => self.rng.gen_range(0..10).to_string(),
            7 => "len(xs)".into(),
            8 => "sum(xs) % 97".into(),
            _ => "xs[0]".into(),
        }
    }

    fn int_expr(&mut self, depth: usize) -> String {
        if depth == 0 || self.rng.gen_bool(0.4) {
            return self.atom();
        }
        let l = self.int_expr(depth - 1);
        let r = self.int_expr(depth - 1);
        let op = *["+", "-", "*", "+", "-"].choose(&mut self.rng).unwrap();
        if self.rng.gen_bool(0.15) {
            let d = self.rng.gen_range(1..7);
            let op = *["//", "%"].choose(&mut self.rng).unwrap();
            return format!("({l} {op} {d})");
        }
        format!("({l} {op} {r})")
    }

    fn cond(&mut self) -> String {
        let l = self.atom();
        let r = self.atom();
        let op = *["<", "<=", ">", ">=", "==", "!="].choose(&mut self.rng).unwrap();
        match self.rng.gen_range(0..6) {
            0 => {
                let extra = self.atom();
                format!("{l} {op} {r} and {extra} > 2")
            }
            1 => format!("not {l} {op} {r}"),
            2 => {
                let m = self.atom();
                format!("{l} < {m} < {r}")
            }
            _ => format!("{l} {op} {r}"),
        }
    }

    /// A call of a later helper (never the current one or an earlier one),
    /// or of `rec`, or a builtin when neither is available.
    fn call_expr(&mut self) -> String {
        let first = self.current.map_or(0, |k| k + 1);
        let mut callable: Vec<String> = (first..self.helpers)
            .filter(|k| self.loop_depth == 0 || *k + 1 == self.helpers)
            .map(|k| format!("g{k}"))
            .collect();
        if self.with_rec {
            callable.push("rec".into());
        }
        let Some(f) = callable.choose(&mut self.rng).cloned() else {
            return "len(xs + [a])".into();
        };
        if f == "rec" {
            let n = self.rng.gen_range(0..6);
            return format!("rec({n})");
        }
        let x = self.int_expr(1);
        let y = self.atom();
        format!("{f}({x}, {y}) % 97")
    }
}

/// Vocabulary the selector generator draws from; matches generated programs.
const NAMES: [&str; 9] = ["g0", "g1", "g2", "rec", "main", "len", "sum", "range", "nothing"];
const VARS: [&str; 9] = ["a", "b", "c", "xs", "i0", "i1", "w0", "n", "zz"];
const KINDS: [&str; 9] = ["call", "loop", "iter", "stmt", "bind", "eval", "ret", "output", "error"];

/// A random selector text. Selectors are valid and use the vocabulary of
/// [`program`].
pub fn selector(rng: &mut impl Rng) -> String {
    let steps = rng.gen_range(1..=3);
    let mut out = String::new();
    for i in 0..steps {
        if i > 0 {
            out.push_str(match rng.gen_range(0..6) {
                0..=2 => " ",
                3 => " > ",
                4 => " / ",
                _ => ">",
            });
        }
        step(rng, &mut out, true);
    }
    out
}

fn step(rng: &mut impl Rng, out: &mut String, allow_has: bool) {
    if rng.gen_bool(0.2) {
        out.push('*');
    } else {
        out.push_str(KINDS.choose(rng).unwrap());
    }
    let filters = rng.gen_range(0..=2);
    for _ in 0..filters {
        match rng.gen_range(0..20) {
            0..=11 => attr(rng, out),
            12 => out.push_str(":first"),
            13 => out.push_str(":last"),
            14..=15 => {
                let k = rng.gen_range(1..=4);
                write!(out, ":nth({k})").unwrap();
            }
            _ if allow_has => {
                out.push_str(":has(");
                out.push_str(["", "> ", "/ "].choose(rng).unwrap());
                step(rng, out, false);
                if rng.gen_bool(0.3) {
                    out.push(' ');
                    step(rng, out, false);
                }
                out.push(')');
            }
            _ => out.push_str(":first"),
        }
    }
}

fn attr(rng: &mut impl Rng, out: &mut String) {
    match rng.gen_range(0..9) {
        0 => write!(out, "[name=\"{}\"]", NAMES.choose(rng).unwrap()).unwrap(),
        1 => write!(out, "[var={}]", VARS.choose(rng).unwrap()).unwrap(),
        2 => write!(out, "[func=\"{}\"]", NAMES.choose(rng).unwrap()).unwrap(),
        3 => write!(out, "[file=\"{}\"]", [HELPERS_FILE, MAIN_FILE, "x.py"].choose(rng).unwrap()).unwrap(),
        4 => write!(out, "[line={}]", rng.gen_range(1..40)).unwrap(),
        5 => write!(out, "[idx={}]", rng.gen_range(1..6)).unwrap(),
        6 => match rng.gen_range(0..6) {
            0 => out.push_str("[value=null]"),
            1 => out.push_str("[value=true]"),
            2 => out.push_str("[value=false]"),
            _ => write!(out, "[value={}]", rng.gen_range(-3..12)).unwrap(),
        },
        7 => write!(out, "[oid={}]", rng.gen_range(1..10)).unwrap(),
        _ => write!(out, "[expr=\"{}\"]", ["a", "xs", "len(xs)", "sum(xs)", "rec(n - 1)"].choose(rng).unwrap()).unwrap(),
    }
}

/// Seeded generator for a stream of selectors.
pub fn selector_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
