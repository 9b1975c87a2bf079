use super::ast::*;
use super::lexer::{tokenize, Spanned, Tok};
use super::ParseError;

const KEYWORDS: &[&str] = &[
    "program", "domain", "const", "thread", "regs", "init", "exit", "begin", "end", "goto", "mem",
    "assert", "scfence", "fence",
];

pub(crate) fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

/// Parse a program in the line-oriented text format.
///
/// ```text
/// program MessagePassing
/// domain 3
/// const d1 = 0
/// thread t_w
/// regs
/// init l0
/// begin
///   l0: mem[d1] <- 1; goto l1;
/// end
/// ```
///
/// When `domain` is omitted it defaults to one more than the largest literal
/// or constant, and at least 2.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0 };
    p.program()
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let here = &self.toks[self.pos];
        let found = here.tok.to_string();
        let message = if expected.len() == 1 {
            format!("expected {}, found {found}", expected[0])
        } else {
            format!("expected one of {}, found {found}", expected.join(", "))
        };
        ParseError::new(
            here.line,
            here.column,
            message,
            expected.iter().map(|s| s.to_string()).collect(),
            found,
        )
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.is_kw(kw) {
            self.advance();
            Ok(())
        } else {
            Err(self.error(&[&format!("`{kw}`")]))
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            Err(self.error(&[&tok.to_string()]))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Tok::Ident(s) if !is_keyword(s) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            _ => Err(self.error(&[what])),
        }
    }

    fn number(&mut self) -> Result<Value, ParseError> {
        match *self.peek() {
            Tok::Int(n) => {
                let v = Value::try_from(n).map_err(|_| {
                    let here = &self.toks[self.pos];
                    ParseError::new(here.line, here.column, "literal out of range", vec![], n.to_string())
                })?;
                self.advance();
                Ok(v)
            }
            _ => Err(self.error(&["integer"])),
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        self.expect_kw("program")?;
        let name = self.ident("program name")?;
        let mut domain = None;
        if self.is_kw("domain") {
            self.advance();
            domain = Some(self.number()?);
        }
        let mut symbols = Vec::new();
        while self.is_kw("const") {
            self.advance();
            let name = self.ident("constant name")?;
            self.expect(Tok::Eq)?;
            let value = self.number()?;
            symbols.push(Symbol { name, value });
        }
        let mut threads = Vec::new();
        loop {
            if self.is_kw("thread") {
                threads.push(self.thread()?);
            } else if *self.peek() == Tok::Eof {
                break;
            } else {
                return Err(self.error(&["`thread`", "end of input"]));
            }
        }
        let domain_size = domain.unwrap_or_else(|| inferred_domain(&symbols, &threads));
        Ok(Program {
            name,
            domain_size,
            symbols,
            threads,
        })
    }

    fn thread(&mut self) -> Result<Thread, ParseError> {
        self.expect_kw("thread")?;
        let name = self.ident("thread name")?;
        self.expect_kw("regs")?;
        let mut registers = Vec::new();
        while !self.is_kw("init") {
            registers.push(self.ident("register name or `init`")?);
        }
        self.expect_kw("init")?;
        let init_label = self.ident("initial label")?;
        let mut exit_labels = None;
        if self.is_kw("exit") {
            self.advance();
            let mut labels = Vec::new();
            while !self.is_kw("begin") {
                labels.push(self.ident("label or `begin`")?);
            }
            exit_labels = Some(labels);
        }
        self.expect_kw("begin")?;
        let mut instructions = Vec::new();
        while !self.is_kw("end") {
            instructions.push(self.labeled_instruction()?);
        }
        self.expect_kw("end")?;
        Ok(Thread {
            name,
            registers,
            init_label,
            exit_labels,
            instructions,
        })
    }

    fn labeled_instruction(&mut self) -> Result<LabeledInstruction, ParseError> {
        let label = self.ident("label or `end`")?;
        self.expect(Tok::Colon)?;
        let instruction = self.instruction()?;
        self.expect(Tok::Semi)?;
        self.expect_kw("goto")?;
        let next = self.ident("label")?;
        self.expect(Tok::Semi)?;
        Ok(LabeledInstruction {
            label,
            instruction,
            next,
        })
    }

    fn instruction(&mut self) -> Result<Instruction, ParseError> {
        if self.is_kw("mem") {
            self.advance();
            self.expect(Tok::LBracket)?;
            let addr = self.expr()?;
            self.expect(Tok::RBracket)?;
            self.expect(Tok::Arrow)?;
            let value = self.expr()?;
            return Ok(Instruction::Store { addr, value });
        }
        if self.is_kw("assert") {
            self.advance();
            return Ok(Instruction::Assert(self.expr()?));
        }
        if self.is_kw("scfence") {
            self.advance();
            return Ok(Instruction::ScFence);
        }
        if self.is_kw("fence") {
            self.advance();
            let mut addrs = Vec::new();
            if *self.peek() != Tok::Semi {
                addrs.push(self.expr()?);
                while *self.peek() == Tok::Comma {
                    self.advance();
                    addrs.push(self.expr()?);
                }
            }
            return Ok(Instruction::Fence(addrs));
        }
        let dest = match self.peek() {
            Tok::Ident(s) if !is_keyword(s) => self.ident("register")?,
            _ => {
                return Err(self.error(&[
                    "register",
                    "`mem`",
                    "`assert`",
                    "`scfence`",
                    "`fence`",
                ]))
            }
        };
        self.expect(Tok::Arrow)?;
        if self.is_kw("mem") && *self.peek_at(1) == Tok::LBracket {
            self.advance();
            self.advance();
            let addr = self.expr()?;
            self.expect(Tok::RBracket)?;
            Ok(Instruction::Load { dest, addr })
        } else {
            Ok(Instruction::Local {
                dest,
                expr: self.expr()?,
            })
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Tok::Eq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            _ => return Ok(lhs),
        };
        self.advance();
        let rhs = self.additive()?;
        Ok(Expr::bin(op, lhs, rhs))
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.multiplicative()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Percent => BinOp::Rem,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.advance();
                Ok(Expr::not(self.unary()?))
            }
            Tok::Int(_) => Ok(Expr::Const(self.number()?)),
            Tok::Ident(s) if !is_keyword(&s) => {
                self.advance();
                Ok(Expr::Var(s))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            _ => Err(self.error(&["expression"])),
        }
    }
}

fn inferred_domain(symbols: &[Symbol], threads: &[Thread]) -> Value {
    let mut lits = Vec::new();
    for t in threads {
        for li in &t.instructions {
            match &li.instruction {
                Instruction::Load { addr, .. } => addr.literals(&mut lits),
                Instruction::Store { addr, value } => {
                    addr.literals(&mut lits);
                    value.literals(&mut lits);
                }
                Instruction::Local { expr, .. } | Instruction::Assert(expr) => {
                    expr.literals(&mut lits)
                }
                Instruction::ScFence => {}
                Instruction::Fence(es) => es.iter().for_each(|e| e.literals(&mut lits)),
            }
        }
    }
    let max = symbols
        .iter()
        .map(|s| s.value)
        .chain(lits)
        .max()
        .unwrap_or(0);
    max.saturating_add(1).max(2)
}
