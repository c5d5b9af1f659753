//! Recursive-descent parser over the token stream produced by the lexer.

use std::sync::Arc;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::{SourceSpan, SyntaxError};

/// Parses one source file.
pub fn parse(file_name: &str, source_text: &str) -> Result<SourceFile, SyntaxError> {
    let file: Arc<str> = Arc::from(file_name);
    let tokens = tokenize(&file, source_text)?;
    let lines: Vec<Vec<char>> = source_text
        .split('\n')
        .map(|l| l.trim_end_matches('\r').chars().collect())
        .collect();
    let mut parser = Parser {
        file: file.clone(),
        tokens,
        pos: 0,
        lines,
        in_function: false,
    };
    let body = parser.file_items()?;
    Ok(SourceFile {
        name: file,
        text: source_text.to_string(),
        body,
    })
}

struct Parser {
    file: Arc<str>,
    tokens: Vec<Token>,
    pos: usize,
    lines: Vec<Vec<char>>,
    in_function: bool,
}

type PResult<T> = Result<T, SyntaxError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn advance(&mut self) -> Token {
        let token = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        token
    }

    fn at(&self, tok: &Tok) -> bool {
        self.peek() == tok
    }

    fn eat(&mut self, tok: &Tok) -> Option<Token> {
        if self.at(tok) {
            Some(self.advance())
        } else {
            None
        }
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> PResult<Token> {
        if self.at(tok) {
            Ok(self.advance())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn unexpected(&self, what: &str) -> SyntaxError {
        let token = &self.tokens[self.pos];
        SyntaxError {
            span: self.token_span(token),
            message: format!("expected {what}, found {}", token.tok.describe()),
        }
    }

    fn error(&self, span: SourceSpan, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            span,
            message: message.into(),
        }
    }

    fn token_span(&self, token: &Token) -> SourceSpan {
        SourceSpan::new(self.file.clone(), token.line, token.col, token.line, token.end_col)
    }

    fn span_between(&self, first: &Token, last: &Token) -> SourceSpan {
        SourceSpan::new(self.file.clone(), first.line, first.col, last.line, last.end_col)
    }

    fn previous(&self) -> &Token {
        &self.tokens[self.pos.saturating_sub(1)]
    }

    /// Source text of a single-line span.
    fn text_of(&self, span: &SourceSpan) -> Arc<str> {
        let line = &self.lines[span.line as usize - 1];
        let start = (span.col - 1) as usize;
        let end = if span.end_line == span.line {
            (span.end_col - 1) as usize
        } else {
            line.len()
        };
        line[start..end.min(line.len())].iter().collect::<String>().into()
    }

    fn file_items(&mut self) -> PResult<Vec<Item>> {
        let mut items = Vec::new();
        loop {
            match self.peek() {
                Tok::Eof => return Ok(items),
                Tok::Def => items.push(Item::Function(Arc::new(self.function_def()?))),
                Tok::Indent => return Err(self.unexpected("a statement (unexpected indent)")),
                _ => items.push(Item::Stmt(self.statement()?)),
            }
        }
    }

    fn function_def(&mut self) -> PResult<FunctionDef> {
        let def_tok = self.advance();
        if self.in_function {
            return Err(self.error(self.token_span(&def_tok), "nested function definitions are not supported"));
        }
        let name_tok = self.advance();
        let Tok::Name(name) = name_tok.tok.clone() else {
            self.pos -= 1;
            return Err(self.unexpected("function name"));
        };
        self.expect(&Tok::LParen, "'('")?;
        let mut params: Vec<Ident> = Vec::new();
        if !self.at(&Tok::RParen) {
            loop {
                let tok = self.advance();
                let Tok::Name(param) = tok.tok.clone() else {
                    self.pos -= 1;
                    return Err(self.unexpected("parameter name"));
                };
                let span = self.token_span(&tok);
                if params.iter().any(|p| p.name == param) {
                    return Err(self.error(span, format!("duplicate parameter '{param}'")));
                }
                params.push(Ident { name: param, span });
                if self.eat(&Tok::Comma).is_none() || self.at(&Tok::RParen) {
                    break;
                }
            }
        }
        self.expect(&Tok::RParen, "')'")?;
        let colon = self.expect(&Tok::Colon, "':'")?;
        let header = self.span_between(&def_tok, &colon);

        self.in_function = true;
        let body = self.suite();
        self.in_function = false;
        let body = body?;
        let span = header.to(&body.last().expect("suites are non-empty").span);
        Ok(FunctionDef {
            name,
            params,
            body,
            span,
            header,
        })
    }

    /// Either an indented block or a simple statement on the header line.
    fn suite(&mut self) -> PResult<Vec<Stmt>> {
        if self.eat(&Tok::Newline).is_some() {
            self.expect(&Tok::Indent, "an indented block")?;
            let mut body = Vec::new();
            while !self.at(&Tok::Dedent) && !self.at(&Tok::Eof) {
                if self.at(&Tok::Def) {
                    let tok = self.tokens[self.pos].clone();
                    return Err(self.error(self.token_span(&tok), "nested function definitions are not supported"));
                }
                body.push(self.statement()?);
            }
            self.expect(&Tok::Dedent, "dedent")?;
            Ok(body)
        } else {
            let stmt = self.simple_statement()?;
            self.expect(&Tok::Newline, "end of line")?;
            Ok(vec![stmt])
        }
    }

    fn statement(&mut self) -> PResult<Stmt> {
        match self.peek() {
            Tok::If => self.if_statement(),
            Tok::While => self.while_statement(),
            Tok::For => self.for_statement(),
            _ => {
                let stmt = self.simple_statement()?;
                self.expect(&Tok::Newline, "end of line")?;
                Ok(stmt)
            }
        }
    }

    fn compound_header(&self, first: &Token, colon: &Token) -> (SourceSpan, Arc<str>) {
        let header = self.span_between(first, colon);
        let text = self.text_of(&header);
        (header, text)
    }

    fn if_statement(&mut self) -> PResult<Stmt> {
        let if_tok = self.advance();
        let cond = self.expression()?;
        let colon = self.expect(&Tok::Colon, "':'")?;
        let (header, text) = self.compound_header(&if_tok, &colon);
        let body = self.suite()?;
        let mut arms = vec![IfArm { cond, body }];
        while self.eat(&Tok::Elif).is_some() {
            let cond = self.expression()?;
            self.expect(&Tok::Colon, "':'")?;
            let body = self.suite()?;
            arms.push(IfArm { cond, body });
        }
        let else_body = if self.eat(&Tok::Else).is_some() {
            self.expect(&Tok::Colon, "':'")?;
            Some(self.suite()?)
        } else {
            None
        };
        let last = else_body
            .as_ref()
            .and_then(|b| b.last())
            .or_else(|| arms.last().and_then(|a| a.body.last()))
            .expect("suites are non-empty");
        let span = header.to(&last.span);
        Ok(Stmt {
            kind: StmtKind::If { arms, else_body },
            span,
            header,
            text,
        })
    }

    fn while_statement(&mut self) -> PResult<Stmt> {
        let while_tok = self.advance();
        let cond = self.expression()?;
        let colon = self.expect(&Tok::Colon, "':'")?;
        let (header, text) = self.compound_header(&while_tok, &colon);
        let body = self.suite()?;
        let span = header.to(&body.last().expect("suites are non-empty").span);
        Ok(Stmt {
            kind: StmtKind::While { cond, body },
            span,
            header,
            text,
        })
    }

    fn for_statement(&mut self) -> PResult<Stmt> {
        let for_tok = self.advance();
        let target = self.target()?;
        self.expect(&Tok::In, "'in'")?;
        let iterable = self.expr_list()?;
        let colon = self.expect(&Tok::Colon, "':'")?;
        let (header, text) = self.compound_header(&for_tok, &colon);
        let body = self.suite()?;
        let span = header.to(&body.last().expect("suites are non-empty").span);
        Ok(Stmt {
            kind: StmtKind::For { target, iterable, body },
            span,
            header,
            text,
        })
    }

    /// Loop target: `x`, `a, b` or `(a, b)`.
    fn target(&mut self) -> PResult<Target> {
        let first = self.tokens[self.pos].clone();
        let parenthesized = self.eat(&Tok::LParen).is_some();
        let mut names = Vec::new();
        loop {
            let tok = self.advance();
            let Tok::Name(name) = tok.tok.clone() else {
                self.pos -= 1;
                return Err(self.unexpected("a variable name"));
            };
            names.push(Ident {
                name,
                span: self.token_span(&tok),
            });
            if self.eat(&Tok::Comma).is_none() || !matches!(self.peek(), Tok::Name(_)) {
                break;
            }
        }
        if parenthesized {
            self.expect(&Tok::RParen, "')'")?;
        }
        let last = self.previous().clone();
        if names.len() == 1 && !parenthesized && !matches!(last.tok, Tok::Comma) {
            return Ok(Target::Name(names.pop().unwrap()));
        }
        Ok(Target::Tuple {
            names,
            span: self.span_between(&first, &last),
        })
    }

    fn simple_statement(&mut self) -> PResult<Stmt> {
        let first = self.tokens[self.pos].clone();
        let kind = match self.peek() {
            Tok::Pass => {
                self.advance();
                StmtKind::Pass
            }
            Tok::Return => {
                let tok = self.advance();
                if !self.in_function {
                    return Err(self.error(self.token_span(&tok), "'return' outside function"));
                }
                if self.at(&Tok::Newline) {
                    StmtKind::Return(None)
                } else {
                    StmtKind::Return(Some(self.expr_list()?))
                }
            }
            Tok::Def => return Err(self.error(self.token_span(&first), "nested function definitions are not supported")),
            Tok::Elif | Tok::Else => return Err(self.unexpected("a statement")),
            _ => {
                let lhs = self.expr_list()?;
                if self.eat(&Tok::Assign).is_some() {
                    let target = self.to_target(lhs)?;
                    let value = self.expr_list()?;
                    if self.at(&Tok::Assign) {
                        let tok = self.tokens[self.pos].clone();
                        return Err(self.error(self.token_span(&tok), "chained assignment is not supported"));
                    }
                    StmtKind::Assign { target, value }
                } else {
                    StmtKind::Expr(lhs)
                }
            }
        };
        let last = self.previous().clone();
        let span = self.span_between(&first, &last);
        let text = self.text_of(&span);
        Ok(Stmt {
            kind,
            header: span.clone(),
            span,
            text,
        })
    }

    fn to_target(&self, expr: Expr) -> PResult<Target> {
        let ident = |e: &Expr| match &e.kind {
            ExprKind::Name(name) => Some(Ident {
                name: name.clone(),
                span: e.span.clone(),
            }),
            _ => None,
        };
        if let Some(id) = ident(&expr) {
            return Ok(Target::Name(id));
        }
        if let ExprKind::Tuple(items) = &expr.kind {
            if let Some(names) = items.iter().map(ident).collect::<Option<Vec<_>>>() {
                return Ok(Target::Tuple {
                    names,
                    span: expr.span.clone(),
                });
            }
        }
        Err(self.error(expr.span.clone(), "cannot assign to expression"))
    }

    fn make_expr(&self, kind: ExprKind, span: SourceSpan) -> Expr {
        let text = self.text_of(&span);
        Expr { kind, span, text }
    }

    /// `expr (, expr)* [,]`, producing a tuple when any comma is present.
    fn expr_list(&mut self) -> PResult<Expr> {
        let first = self.expression()?;
        if !self.at(&Tok::Comma) {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat(&Tok::Comma).is_some() {
            if !self.starts_expression() {
                break;
            }
            items.push(self.expression()?);
        }
        let last = self.previous().clone();
        let start = items[0].span.clone();
        let span = SourceSpan::new(self.file.clone(), start.line, start.col, last.line, last.end_col);
        Ok(self.make_expr(ExprKind::Tuple(items), span))
    }

    fn starts_expression(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Name(_)
                | Tok::Int(_)
                | Tok::Float(_)
                | Tok::Str(_)
                | Tok::True
                | Tok::False
                | Tok::None
                | Tok::LParen
                | Tok::LBracket
                | Tok::Minus
                | Tok::Plus
                | Tok::Not
        )
    }

    fn expression(&mut self) -> PResult<Expr> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        while self.eat(&Tok::Or).is_some() {
            let rhs = self.and_expr()?;
            let span = lhs.span.to(&rhs.span);
            lhs = self.make_expr(
                ExprKind::BoolOp { op: BoolOp::Or, lhs: Box::new(lhs), rhs: Box::new(rhs) },
                span,
            );
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.not_expr()?;
        while self.eat(&Tok::And).is_some() {
            let rhs = self.not_expr()?;
            let span = lhs.span.to(&rhs.span);
            lhs = self.make_expr(
                ExprKind::BoolOp { op: BoolOp::And, lhs: Box::new(lhs), rhs: Box::new(rhs) },
                span,
            );
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> PResult<Expr> {
        if let Some(tok) = self.eat(&Tok::Not) {
            let operand = self.not_expr()?;
            let span = self.token_span(&tok).to(&operand.span);
            return Ok(self.make_expr(ExprKind::Unary { op: UnaryOp::Not, operand: Box::new(operand) }, span));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let first = self.arith()?;
        let mut rest = Vec::new();
        loop {
            let op = match self.peek() {
                Tok::EqEq => CmpOp::Eq,
                Tok::NotEq => CmpOp::Ne,
                Tok::Lt => CmpOp::Lt,
                Tok::Le => CmpOp::Le,
                Tok::Gt => CmpOp::Gt,
                Tok::Ge => CmpOp::Ge,
                _ => break,
            };
            self.advance();
            rest.push((op, self.arith()?));
        }
        if rest.is_empty() {
            return Ok(first);
        }
        let span = first.span.to(&rest.last().unwrap().1.span);
        Ok(self.make_expr(ExprKind::Compare { first: Box::new(first), rest }, span))
    }

    fn arith(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.advance();
            let rhs = self.term()?;
            let span = lhs.span.to(&rhs.span);
            lhs = self.make_expr(ExprKind::BinOp { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }, span);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::DoubleSlash => BinOp::FloorDiv,
                Tok::Percent => BinOp::Mod,
                _ => break,
            };
            self.advance();
            let rhs = self.factor()?;
            let span = lhs.span.to(&rhs.span);
            lhs = self.make_expr(ExprKind::BinOp { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }, span);
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> PResult<Expr> {
        let op = match self.peek() {
            Tok::Minus => Some(UnaryOp::Neg),
            Tok::Plus => Some(UnaryOp::Pos),
            _ => None,
        };
        if let Some(op) = op {
            let tok = self.advance();
            let operand = self.factor()?;
            let span = self.token_span(&tok).to(&operand.span);
            return Ok(self.make_expr(ExprKind::Unary { op, operand: Box::new(operand) }, span));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut expr = self.atom()?;
        loop {
            if self.eat(&Tok::LParen).is_some() {
                let mut args = Vec::new();
                if !self.at(&Tok::RParen) {
                    loop {
                        args.push(self.expression()?);
                        if self.eat(&Tok::Comma).is_none() || self.at(&Tok::RParen) {
                            break;
                        }
                    }
                }
                let close = self.expect(&Tok::RParen, "')' or ','")?;
                let span = expr.span.to(&self.token_span(&close));
                expr = self.make_expr(ExprKind::Call { callee: Box::new(expr), args }, span);
            } else if self.eat(&Tok::LBracket).is_some() {
                let index = self.expression()?;
                let close = self.expect(&Tok::RBracket, "']'")?;
                let span = expr.span.to(&self.token_span(&close));
                expr = self.make_expr(
                    ExprKind::Index { target: Box::new(expr), index: Box::new(index) },
                    span,
                );
            } else {
                return Ok(expr);
            }
        }
    }

    fn atom(&mut self) -> PResult<Expr> {
        let tok = self.tokens[self.pos].clone();
        let span = self.token_span(&tok);
        let kind = match &tok.tok {
            Tok::Name(name) => ExprKind::Name(name.clone()),
            Tok::Int(v) => ExprKind::Int(*v),
            Tok::Float(v) => ExprKind::Float(*v),
            Tok::Str(s) => ExprKind::Str(s.clone()),
            Tok::True => ExprKind::Bool(true),
            Tok::False => ExprKind::Bool(false),
            Tok::None => ExprKind::None,
            Tok::LParen => return self.parenthesized(),
            Tok::LBracket => return self.list_display(),
            _ => return Err(self.unexpected("an expression")),
        };
        self.advance();
        Ok(self.make_expr(kind, span))
    }

    fn parenthesized(&mut self) -> PResult<Expr> {
        let open = self.advance();
        if let Some(close) = self.eat(&Tok::RParen) {
            let span = self.span_between(&open, &close);
            return Ok(self.make_expr(ExprKind::Tuple(Vec::new()), span));
        }
        let first = self.expression()?;
        if let Some(_close) = self.eat(&Tok::RParen) {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat(&Tok::Comma).is_some() {
            if self.at(&Tok::RParen) {
                break;
            }
            items.push(self.expression()?);
        }
        let close = self.expect(&Tok::RParen, "')' or ','")?;
        let span = self.span_between(&open, &close);
        Ok(self.make_expr(ExprKind::Tuple(items), span))
    }

    fn list_display(&mut self) -> PResult<Expr> {
        let open = self.advance();
        let mut items = Vec::new();
        if !self.at(&Tok::RBracket) {
            loop {
                items.push(self.expression()?);
                if self.eat(&Tok::Comma).is_none() || self.at(&Tok::RBracket) {
                    break;
                }
            }
        }
        let close = self.expect(&Tok::RBracket, "']' or ','")?;
        let span = self.span_between(&open, &close);
        Ok(self.make_expr(ExprKind::List(items), span))
    }
}
