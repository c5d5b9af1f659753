use super::{Attr, Combinator, Filter, Literal, Selector, SelectorSyntaxError, Step};
use crate::model::NodeKind;

const STEP_KINDS: [NodeKind; 9] = [
    NodeKind::Call,
    NodeKind::Loop,
    NodeKind::Iter,
    NodeKind::Stmt,
    NodeKind::Bind,
    NodeKind::Eval,
    NodeKind::Ret,
    NodeKind::Output,
    NodeKind::Error,
];

pub fn parse_selector(text: &str) -> Result<Selector, SelectorSyntaxError> {
    let mut p = Parser {
        chars: text.chars().collect(),
        pos: 0,
    };
    p.skip_ws();
    let selector = p.selector()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return p.error("a combinator or the end of the selector");
    }
    Ok(selector)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn error<T>(&self, expected: &str) -> Result<T, SelectorSyntaxError> {
        Err(SelectorSyntaxError {
            position: self.pos,
            expected: expected.to_string(),
        })
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) -> bool {
        let start = self.pos;
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
        self.pos > start
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), SelectorSyntaxError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.error(&format!("'{c}'"))
        }
    }

    fn word(&mut self) -> String {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn selector(&mut self) -> Result<Selector, SelectorSyntaxError> {
        let first = self.step()?;
        let mut rest = Vec::new();
        loop {
            let save = self.pos;
            let spaced = self.skip_ws();
            let combinator = if self.eat('>') {
                Combinator::Child
            } else if self.eat('/') {
                Combinator::SameFrame
            } else if spaced && self.starts_step() {
                Combinator::Descendant
            } else {
                self.pos = save;
                break;
            };
            self.skip_ws();
            rest.push((combinator, self.step()?));
        }
        Ok(Selector { first, rest })
    }

    fn starts_step(&self) -> bool {
        self.peek()
            .is_some_and(|c| c.is_alphabetic() || c == '*' || c == '[' || c == ':')
    }

    fn step(&mut self) -> Result<Step, SelectorSyntaxError> {
        let kind = match self.peek() {
            Some('*') => {
                self.pos += 1;
                None
            }
            Some('[' | ':') => None,
            Some(c) if c.is_alphabetic() => {
                let start = self.pos;
                let word = self.word();
                match STEP_KINDS.iter().find(|k| k.as_str() == word) {
                    Some(kind) => Some(*kind),
                    None => {
                        self.pos = start;
                        return self.error("a node kind (call, loop, iter, stmt, bind, eval, ret, output, error) or '*'");
                    }
                }
            }
            _ => return self.error("a step"),
        };
        let mut filters = Vec::new();
        loop {
            match self.peek() {
                Some('[') => {
                    self.pos += 1;
                    filters.push(self.attribute()?);
                }
                Some(':') => {
                    self.pos += 1;
                    filters.push(self.pseudo()?);
                }
                _ => break,
            }
        }
        Ok(Step { kind, filters })
    }

    fn attribute(&mut self) -> Result<Filter, SelectorSyntaxError> {
        self.skip_ws();
        let start = self.pos;
        let word = self.word();
        let Some(attr) = Attr::ALL.into_iter().find(|a| a.as_str() == word) else {
            self.pos = start;
            return self.error("an attribute (name, var, func, file, line, idx, value, oid, expr)");
        };
        self.skip_ws();
        self.expect('=')?;
        self.skip_ws();
        let literal_at = self.pos;
        let value = self.literal()?;
        let ok = match attr {
            Attr::Name | Attr::Var | Attr::Func | Attr::File | Attr::Expr => matches!(value, Literal::Str(_)),
            Attr::Line | Attr::Idx | Attr::Oid => matches!(value, Literal::Int(i) if i >= 0),
            Attr::Value => true,
        };
        if !ok {
            self.pos = literal_at;
            return self.error(match attr {
                Attr::Line | Attr::Idx | Attr::Oid => "a non-negative integer",
                _ => "a string",
            });
        }
        self.skip_ws();
        self.expect(']')?;
        Ok(Filter::Attr { attr, value })
    }

    fn literal(&mut self) -> Result<Literal, SelectorSyntaxError> {
        match self.peek() {
            Some('"') => {
                self.pos += 1;
                let mut s = String::new();
                loop {
                    match self.peek() {
                        None => return self.error("'\"' closing the string"),
                        Some('"') => {
                            self.pos += 1;
                            return Ok(Literal::Str(s));
                        }
                        Some('\\') => {
                            self.pos += 1;
                            match self.peek() {
                                Some('n') => s.push('\n'),
                                Some(c @ ('"' | '\\')) => s.push(c),
                                _ => return self.error("an escape sequence (\\\", \\\\, \\n)"),
                            }
                            self.pos += 1;
                        }
                        Some(c) => {
                            s.push(c);
                            self.pos += 1;
                        }
                    }
                }
            }
            Some(c) if c.is_ascii_digit() || c == '-' => {
                let start = self.pos;
                self.pos += 1;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
                let text: String = self.chars[start..self.pos].iter().collect();
                text.parse().map(Literal::Int).or_else(|_| {
                    self.pos = start;
                    self.error("an integer")
                })
            }
            Some(c) if c.is_alphabetic() || c == '_' => Ok(match self.word().as_str() {
                "null" => Literal::Null,
                "true" => Literal::Bool(true),
                "false" => Literal::Bool(false),
                other => Literal::Str(other.to_string()),
            }),
            _ => self.error("a value (null, true, false, integer or quoted string)"),
        }
    }

    fn pseudo(&mut self) -> Result<Filter, SelectorSyntaxError> {
        let start = self.pos;
        match self.word().as_str() {
            "first" => Ok(Filter::First),
            "last" => Ok(Filter::Last),
            "nth" => {
                self.expect('(')?;
                self.skip_ws();
                let at = self.pos;
                let k = match self.literal() {
                    Ok(Literal::Int(k)) if k >= 1 => k as usize,
                    _ => {
                        self.pos = at;
                        return self.error("a positive integer");
                    }
                };
                self.skip_ws();
                self.expect(')')?;
                Ok(Filter::Nth(k))
            }
            "has" => {
                self.expect('(')?;
                self.skip_ws();
                let combinator = if self.eat('>') {
                    Combinator::Child
                } else if self.eat('/') {
                    Combinator::SameFrame
                } else {
                    Combinator::Descendant
                };
                self.skip_ws();
                let selector = self.selector()?;
                self.skip_ws();
                self.expect(')')?;
                Ok(Filter::Has {
                    combinator,
                    selector: Box::new(selector),
                })
            }
            _ => {
                self.pos = start;
                self.error("a pseudo-filter (first, last, nth, has)")
            }
        }
    }
}
