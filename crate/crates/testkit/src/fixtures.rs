use std::path::PathBuf;

use tracer_core::minilang::{link, parse, Program};
use tracer_core::model::{build_tree, TraceTree};
use tracer_core::tracer::{execute_to_vec, Environment, ExecutionLimits, ExitStatus, TraceEvent};

/// Directory holding the on-disk fixtures.
pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub const EXAMPLE_MAIN: &str = include_str!("../fixtures/example/main.py");
pub const EXAMPLE_LOGIC: &str = include_str!("../fixtures/example/logic.py");
pub const EXAMPLE_UTIL: &str = include_str!("../fixtures/example/util.py");
pub const EXAMPLE_DATA: &str = include_str!("../fixtures/example/nums.txt");
pub const EXAMPLE_GOLDEN: &str = include_str!("../fixtures/example/golden.txt");

/// A program together with its inputs.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: &'static str,
    pub files: Vec<(&'static str, String)>,
    pub entry: &'static str,
    pub data: Option<Vec<i64>>,
}

impl Fixture {
    pub fn new(name: &'static str, files: &[(&'static str, &str)], entry: &'static str) -> Self {
        Self {
            name,
            files: files.iter().map(|(f, t)| (*f, t.to_string())).collect(),
            entry,
            data: None,
        }
    }

    pub fn with_data(mut self, data: &[i64]) -> Self {
        self.data = Some(data.to_vec());
        self
    }

    pub fn program(&self) -> Program {
        let files = self
            .files
            .iter()
            .map(|(name, text)| parse(name, text).unwrap_or_else(|e| panic!("{}: {e}", self.name)))
            .collect();
        link(files, self.entry).unwrap_or_else(|e| panic!("{}: {e}", self.name))
    }

    pub fn env(&self) -> Environment {
        match &self.data {
            Some(d) => Environment::with_data(d.clone()),
            None => Environment::default(),
        }
    }

    pub fn events(&self) -> (Vec<TraceEvent>, ExitStatus) {
        execute_to_vec(&self.program(), &ExecutionLimits::default(), &self.env())
    }

    pub fn tree(&self) -> TraceTree {
        build_tree(self.events().0).expect("tracer output is well formed")
    }
}

pub fn example() -> Fixture {
    Fixture::new(
        "example",
        &[("main.py", EXAMPLE_MAIN), ("logic.py", EXAMPLE_LOGIC), ("util.py", EXAMPLE_UTIL)],
        "main",
    )
    .with_data(&[2, 3, 5])
}

pub fn minimal() -> Fixture {
    Fixture::new("minimal", &[("min.py", "def main():\n    return 0\n")], "main")
}

pub const WHILE3: &str = "\
def main():
    i = 0
    total = 0
    while i < 3:
        total = total + i
        i = i + 1
    return total
";

pub fn while3() -> Fixture {
    Fixture::new("while3", &[("while.py", WHILE3)], "main")
}

pub const LOOP5: &str = "\
def main():
    xs = [4, 8, 15, 16, 23]
    total = 0
    for x in xs:
        total = total + x
    return total
";

/// Line of the loop body statement in [`LOOP5`].
pub const LOOP5_BODY_LINE: u32 = 5;
pub const LOOP5_HEADER_LINE: u32 = 4;

pub fn loop5() -> Fixture {
    Fixture::new("loop5", &[("loop.py", LOOP5)], "main")
}

pub const RECURSION: &str = "\
def f(n):
    if n <= 1:
        return 1
    return n * f(n - 1)

def main():
    return f(3)
";

pub fn recursion() -> Fixture {
    Fixture::new("recursion", &[("rec.py", RECURSION)], "main")
}

pub const NEVER_TAKEN: &str = "\
def main():
    x = 5
    if x > 10:
        x = 0
    return x
";

/// Line of the branch body that never runs in [`NEVER_TAKEN`].
pub const NEVER_TAKEN_LINE: u32 = 4;

pub fn never_taken() -> Fixture {
    Fixture::new("never_taken", &[("branch.py", NEVER_TAKEN)], "main")
}

pub fn div_zero() -> Fixture {
    Fixture::new("div_zero", &[("div.py", "def main():\n    return 1 / 0\n")], "main")
}

pub const NESTED: &str = "\
def cell(r, c):
    return r * 10 + c

def main():
    rows = []
    for r in range(3):
        row = []
        for c in range(2):
            row = row + [cell(r, c)]
        rows = rows + [row]
    print(len(rows), rows)
    return rows
";

pub fn nested() -> Fixture {
    Fixture::new("nested", &[("nested.py", NESTED)], "main")
}

/// Divides by each input; a zero in the data stops the run part way.
pub const DIVIDE: &str = "\
def main():
    nums = read_from_file()
    total = 0
    for n in nums:
        total = total + 60 // n
    return total
";

pub fn divide(data: &[i64]) -> Fixture {
    Fixture::new("divide", &[("divide.py", DIVIDE)], "main").with_data(data)
}

pub const MIXED: &str = "\
def pair(a, b):
    return a, b

def main():
    s = \"ab\" + \"c\"
    t = (1, 2.5, None, True)
    flag = not (len(s) == 3 and t[1] > 2) or False
    p, q = pair(s, [t, [s]])
    x = -7 // 2
    y = -7 % 3
    z = 7 / 2
    return p, q, flag, x, y, z
";

pub fn mixed() -> Fixture {
    Fixture::new("mixed", &[("mixed.py", MIXED)], "main")
}

/// Every fixture that runs to completion.
pub fn completing() -> Vec<Fixture> {
    vec![
        example(),
        minimal(),
        while3(),
        loop5(),
        recursion(),
        never_taken(),
        nested(),
        divide(&[2, 3, 5]),
        mixed(),
        while_x(),
        frames(),
    ]
}

/// Every fixture, including the ones that stop on an error.
pub fn all() -> Vec<Fixture> {
    let mut all = completing();
    all.push(div_zero());
    all.push(divide(&[2, 0, 5]));
    all
}

pub const WHILE_X: &str = "\
def main():
    x = 1
    while x < 4:
        x = x + 1
";

pub fn while_x() -> Fixture {
    Fixture::new("while_x", &[("while_x.py", WHILE_X)], "main")
}

pub const FRAMES: &str = "\
def g():
    n = 7
    return n

def f(n):
    if n <= 0:
        return g()
    return f(n - 1) + n

def main():
    return f(2)
";

pub fn frames() -> Fixture {
    Fixture::new("frames", &[("frames.py", FRAMES)], "main")
}
