//! Line-oriented tokenizer with significant indentation.
//!
//! Each non-blank source line yields its tokens followed by `Newline`;
//! indentation changes between lines yield `Indent`/`Dedent`. Statements never
//! continue across lines.

use std::sync::Arc;

use super::{SourceSpan, SyntaxError};

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Name(Arc<str>),
    Int(i64),
    Float(f64),
    Str(Arc<str>),
    Def,
    Return,
    If,
    Elif,
    Else,
    While,
    For,
    In,
    And,
    Or,
    Not,
    True,
    False,
    None,
    Pass,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    DoubleSlash,
    Percent,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Newline,
    Indent,
    Dedent,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Name(name) => format!("name '{name}'"),
            Tok::Int(_) | Tok::Float(_) => "number".to_string(),
            Tok::Str(_) => "string".to_string(),
            Tok::Newline => "end of line".to_string(),
            Tok::Indent => "indent".to_string(),
            Tok::Dedent => "dedent".to_string(),
            Tok::Eof => "end of file".to_string(),
            other => format!("'{}'", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::Def => "def",
            Tok::Return => "return",
            Tok::If => "if",
            Tok::Elif => "elif",
            Tok::Else => "else",
            Tok::While => "while",
            Tok::For => "for",
            Tok::In => "in",
            Tok::And => "and",
            Tok::Or => "or",
            Tok::Not => "not",
            Tok::True => "True",
            Tok::False => "False",
            Tok::None => "None",
            Tok::Pass => "pass",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Assign => "=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::DoubleSlash => "//",
            Tok::Percent => "%",
            Tok::EqEq => "==",
            Tok::NotEq => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            _ => "",
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
    pub end_col: u32,
}

fn keyword(word: &str) -> Option<Tok> {
    Some(match word {
        "def" => Tok::Def,
        "return" => Tok::Return,
        "if" => Tok::If,
        "elif" => Tok::Elif,
        "else" => Tok::Else,
        "while" => Tok::While,
        "for" => Tok::For,
        "in" => Tok::In,
        "and" => Tok::And,
        "or" => Tok::Or,
        "not" => Tok::Not,
        "True" => Tok::True,
        "False" => Tok::False,
        "None" => Tok::None,
        "pass" => Tok::Pass,
        _ => return None,
    })
}

pub(crate) fn tokenize(file: &Arc<str>, text: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut tokens = Vec::new();
    let mut indents: Vec<usize> = vec![0];
    let mut last_line = 0u32;

    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx as u32 + 1;
        last_line = line_no;
        let chars: Vec<char> = raw.trim_end_matches('\r').chars().collect();

        let mut indent = 0;
        let mut tab = None;
        while indent < chars.len() && (chars[indent] == ' ' || chars[indent] == '\t') {
            if chars[indent] == '\t' && tab.is_none() {
                tab = Some(indent);
            }
            indent += 1;
        }
        if indent == chars.len() || chars[indent] == '#' {
            continue;
        }
        if let Some(col) = tab {
            return Err(error_at(file, line_no, col as u32 + 1, "tab in indentation"));
        }

        let top = *indents.last().expect("indent stack is never empty");
        if indent > top {
            indents.push(indent);
            tokens.push(Token { tok: Tok::Indent, line: line_no, col: 1, end_col: indent as u32 + 1 });
        } else if indent < top {
            while *indents.last().unwrap() > indent {
                indents.pop();
                tokens.push(Token { tok: Tok::Dedent, line: line_no, col: 1, end_col: indent as u32 + 1 });
            }
            if *indents.last().unwrap() != indent {
                return Err(error_at(
                    file,
                    line_no,
                    indent as u32 + 1,
                    "unindent does not match any outer indentation level",
                ));
            }
        }

        let end = lex_line(file, line_no, &chars, indent, &mut tokens)?;
        tokens.push(Token { tok: Tok::Newline, line: line_no, col: end, end_col: end });
    }

    let eof_line = last_line.max(1);
    for _ in 1..indents.len() {
        tokens.push(Token { tok: Tok::Dedent, line: eof_line, col: 1, end_col: 1 });
    }
    tokens.push(Token { tok: Tok::Eof, line: eof_line, col: 1, end_col: 1 });
    Ok(tokens)
}

fn error_at(file: &Arc<str>, line: u32, col: u32, message: &str) -> SyntaxError {
    SyntaxError {
        span: SourceSpan::new(file.clone(), line, col, line, col),
        message: message.to_string(),
    }
}

/// Tokenizes one line starting at `start`; returns the column just past the
/// last token.
fn lex_line(
    file: &Arc<str>,
    line: u32,
    chars: &[char],
    start: usize,
    out: &mut Vec<Token>,
) -> Result<u32, SyntaxError> {
    let mut i = start;
    let mut end_col = start as u32 + 1;
    while i < chars.len() {
        let c = chars[i];
        if c == ' ' || c == '\t' {
            i += 1;
            continue;
        }
        if c == '#' {
            break;
        }
        let begin = i;
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[begin..i].iter().collect();
            keyword(&word).unwrap_or_else(|| Tok::Name(word.into()))
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            lex_number(file, line, chars, &mut i)?
        } else if c == '"' || c == '\'' {
            lex_string(file, line, chars, &mut i)?
        } else {
            let next = chars.get(i + 1).copied();
            let (tok, width) = match (c, next) {
                ('/', Some('/')) => (Tok::DoubleSlash, 2),
                ('=', Some('=')) => (Tok::EqEq, 2),
                ('!', Some('=')) => (Tok::NotEq, 2),
                ('<', Some('=')) => (Tok::Le, 2),
                ('>', Some('=')) => (Tok::Ge, 2),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                ('[', _) => (Tok::LBracket, 1),
                (']', _) => (Tok::RBracket, 1),
                (',', _) => (Tok::Comma, 1),
                (':', _) => (Tok::Colon, 1),
                ('=', _) => (Tok::Assign, 1),
                ('+', _) => (Tok::Plus, 1),
                ('-', _) => (Tok::Minus, 1),
                ('*', _) => (Tok::Star, 1),
                ('/', _) => (Tok::Slash, 1),
                ('%', _) => (Tok::Percent, 1),
                ('<', _) => (Tok::Lt, 1),
                ('>', _) => (Tok::Gt, 1),
                _ => {
                    return Err(error_at(
                        file,
                        line,
                        i as u32 + 1,
                        &format!("unexpected character {c:?}"),
                    ))
                }
            };
            i += width;
            tok
        };
        end_col = i as u32 + 1;
        out.push(Token { tok, line, col: begin as u32 + 1, end_col });
    }
    Ok(end_col)
}

fn lex_number(file: &Arc<str>, line: u32, chars: &[char], i: &mut usize) -> Result<Tok, SyntaxError> {
    let begin = *i;
    let mut is_float = false;
    while *i < chars.len() && chars[*i].is_ascii_digit() {
        *i += 1;
    }
    if *i < chars.len() && chars[*i] == '.' {
        is_float = true;
        *i += 1;
        while *i < chars.len() && chars[*i].is_ascii_digit() {
            *i += 1;
        }
    }
    if *i < chars.len() && (chars[*i] == 'e' || chars[*i] == 'E') {
        let mut j = *i + 1;
        if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
            j += 1;
        }
        if j < chars.len() && chars[j].is_ascii_digit() {
            is_float = true;
            *i = j;
            while *i < chars.len() && chars[*i].is_ascii_digit() {
                *i += 1;
            }
        }
    }
    if *i < chars.len() && (chars[*i].is_ascii_alphabetic() || chars[*i] == '_') {
        return Err(error_at(file, line, *i as u32 + 1, "invalid number literal"));
    }
    let literal: String = chars[begin..*i].iter().collect();
    if is_float {
        literal
            .parse::<f64>()
            .map(Tok::Float)
            .map_err(|_| error_at(file, line, begin as u32 + 1, "invalid float literal"))
    } else {
        literal
            .parse::<i64>()
            .map(Tok::Int)
            .map_err(|_| error_at(file, line, begin as u32 + 1, "integer literal too large"))
    }
}

fn lex_string(file: &Arc<str>, line: u32, chars: &[char], i: &mut usize) -> Result<Tok, SyntaxError> {
    let quote = chars[*i];
    let begin = *i;
    *i += 1;
    let mut value = String::new();
    loop {
        let Some(&c) = chars.get(*i) else {
            return Err(error_at(file, line, begin as u32 + 1, "unterminated string literal"));
        };
        *i += 1;
        if c == quote {
            break;
        }
        if c == '\\' {
            let Some(&esc) = chars.get(*i) else {
                return Err(error_at(file, line, begin as u32 + 1, "unterminated string literal"));
            };
            *i += 1;
            match esc {
                'n' => value.push('\n'),
                't' => value.push('\t'),
                'r' => value.push('\r'),
                '0' => value.push('\0'),
                '\\' | '\'' | '"' => value.push(esc),
                other => {
                    value.push('\\');
                    value.push(other);
                }
            }
        } else {
            value.push(c);
        }
    }
    Ok(Tok::Str(value.into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        tokenize(&Arc::from("t.py"), src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn indentation_produces_indent_and_dedent() {
        let toks = kinds("def f():\n  x = 1\n\n  # note\n  return x\ny = 2\n");
        let indents = toks.iter().filter(|t| **t == Tok::Indent).count();
        let dedents = toks.iter().filter(|t| **t == Tok::Dedent).count();
        assert_eq!((indents, dedents), (1, 1));
        assert_eq!(toks.last(), Some(&Tok::Eof));
    }

    #[test]
    fn tabs_are_rejected() {
        let err = tokenize(&Arc::from("t.py"), "def f():\n\treturn 1\n").unwrap_err();
        assert_eq!(err.span.line, 2);
    }

    #[test]
    fn inconsistent_dedent_is_an_error() {
        let err = tokenize(&Arc::from("t.py"), "if x:\n    y = 1\n  z = 2\n").unwrap_err();
        assert_eq!(err.span.line, 3);
        assert!(err.message.contains("unindent"));
    }

    #[test]
    fn numbers_strings_and_operators() {
        let toks = kinds("x = 1.5 // 2 != 'a\\'b' # trailing");
        assert_eq!(
            toks,
            vec![
                Tok::Name("x".into()),
                Tok::Assign,
                Tok::Float(1.5),
                Tok::DoubleSlash,
                Tok::Int(2),
                Tok::NotEq,
                Tok::Str("a'b".into()),
                Tok::Newline,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn columns_count_characters() {
        let toks = tokenize(&Arc::from("t.py"), "s = 'é' + x").unwrap();
        let x = toks.iter().find(|t| t.tok == Tok::Name("x".into())).unwrap();
        assert_eq!((x.col, x.end_col), (11, 12));
    }
}
