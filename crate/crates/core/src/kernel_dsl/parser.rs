//! Recursive-descent parser for kernel expressions and kernel files.
//!
//! Beyond the core grammar the parser accepts a unary minus and imaginary literals
//! such as `0.5i`, so that every expression tree with complex coefficients can be
//! printed and read back.

use crate::error::ParseError;
use crate::kernel_dsl::ast::Expr;
use crate::kernel_dsl::chart::AffineChart;
use crate::kernel_dsl::{builtin_bergman, KernelSpec};
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, bool),
    Ident(String, Option<u64>),
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError { line, column, message: message.into() }
}

fn lex(text: &str, line: usize, col0: usize) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = col0 + i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let simple = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token { tok, col });
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s.parse().map_err(|_| err(line, col, format!("malformed number `{s}`")))?;
            let imag = i < chars.len()
                && chars[i] == 'i'
                && !chars.get(i + 1).is_some_and(|n| n.is_ascii_alphanumeric() || *n == '_');
            if imag {
                i += 1;
            }
            out.push(Token { tok: Tok::Num(v, imag), col });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphabetic() || chars[i] == '_') {
                i += 1;
            }
            let name: String = chars[start..i].iter().collect();
            let dstart = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let index = if dstart < i {
                let s: String = chars[dstart..i].iter().collect();
                Some(s.parse().map_err(|_| err(line, col, "variable index too large"))?)
            } else {
                None
            };
            out.push(Token { tok: Tok::Ident(name, index), col });
            continue;
        }
        return Err(err(line, col, format!("unexpected character `{c}`")));
    }
    out.push(Token { tok: Tok::Eof, col: col0 + chars.len() });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    line: usize,
    m: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn col(&self) -> usize {
        self.toks[self.pos].col
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(err(self.line, self.col(), message))
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.fail(format!("expected {what}, found {}", describe(self.peek())))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::add(lhs, self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::mul(lhs, self.unary()?);
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::div(lhs, self.unary()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(match self.unary()? {
                Expr::Num(c) => Expr::Num(-c),
                e => Expr::neg(e),
            });
        }
        self.factor()
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.base()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let negative = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.bump() {
            Tok::Num(v, false) => Ok(Expr::pow(base, if negative { -v } else { v })),
            Tok::Num(_, true) => {
                self.pos -= 1;
                self.fail("exponent must be a real number")
            }
            other => {
                self.pos -= 1;
                self.fail(format!("expected exponent, found {}", describe(&other)))
            }
        }
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        let col = self.col();
        match self.bump() {
            Tok::Num(v, imag) => Ok(Expr::Num(if imag { C64::new(0.0, v) } else { C64::new(v, 0.0) })),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(fold_literal(inner))
            }
            Tok::Ident(name, index) => match (name.as_str(), index) {
                ("z", Some(k)) | ("wb", Some(k)) => {
                    let k = k as usize;
                    if k == 0 || k > self.m {
                        return Err(err(
                            self.line,
                            col,
                            format!("variable index {name}{k} out of range 1..{}", self.m),
                        ));
                    }
                    Ok(if name == "z" { Expr::Z(k - 1) } else { Expr::Wb(k - 1) })
                }
                ("exp", None) | ("log", None) => {
                    self.expect(Tok::LParen, "`(`")?;
                    let inner = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(if name == "exp" { Expr::exp(inner) } else { Expr::log(inner) })
                }
                _ => {
                    let shown = match index {
                        Some(k) => format!("{name}{k}"),
                        None => name,
                    };
                    Err(err(self.line, col, format!("unknown identifier `{shown}`")))
                }
            },
            other => {
                self.pos = self.pos.saturating_sub(usize::from(other != Tok::Eof));
                Err(err(self.line, col, format!("expected a number, variable or `(`, found {}", describe(&other))))
            }
        }
    }
}

/// `(a + bi)` style literals collapse back into a single complex number.
fn fold_literal(e: Expr) -> Expr {
    match e {
        Expr::Add(a, b) => match (*a, *b) {
            (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
            (a, b) => Expr::add(a, b),
        },
        Expr::Sub(a, b) => match (*a, *b) {
            (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
            (a, b) => Expr::sub(a, b),
        },
        e => e,
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v, false) => format!("number `{v}`"),
        Tok::Num(v, true) => format!("number `{v}i`"),
        Tok::Ident(n, Some(k)) => format!("`{n}{k}`"),
        Tok::Ident(n, None) => format!("`{n}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Caret => "`^`".into(),
        Tok::Eof => "end of input".into(),
    }
}

fn parse_expr_at(text: &str, m: usize, line: usize, col0: usize) -> Result<Expr, ParseError> {
    let toks = lex(text, line, col0)?;
    let mut p = Parser { toks, pos: 0, line, m };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return p.fail(format!("unexpected {}", describe(p.peek())));
    }
    Ok(e)
}

/// Parse one expression in variables `z1..zm`, `wb1..wbm`.
pub fn parse_expr(text: &str, m: usize) -> Result<Expr, ParseError> {
    parse_expr_at(text, m, 1, 1)
}

/// Parse a constant such as `0.25`, `-1.5+2i` or `(0.1 - 0.3i)`.
pub fn parse_complex(text: &str) -> Result<C64, ParseError> {
    let e = parse_expr(text, 0)?;
    e.eval_point(&[], &[]).map_err(|er| err(1, 1, er.to_string()))
}

struct Pending {
    line: usize,
    col: usize,
    text: String,
}

/// Parse a kernel file (see the crate README for the format).
pub fn parse_kernel(text: &str) -> Result<KernelSpec, ParseError> {
    let mut m: Option<(usize, usize)> = None;
    let mut r: Option<(usize, usize)> = None;
    let mut label = String::new();
    let mut chart: Option<Pending> = None;
    let mut bergman: Option<(usize, Vec<f64>)> = None;
    let mut cells: Vec<((usize, usize), Pending)> = Vec::new();

    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let Some(eq) = content.find('=') else {
            let col = content.len() - content.trim_start().len() + 1;
            return Err(err(line, col, "expected `key = value`"));
        };
        let key = content[..eq].trim();
        let key_col = content.len() - content.trim_start().len() + 1;
        let after = &content[eq + 1..];
        let value = after.trim();
        let value_col = eq + 2 + (after.len() - after.trim_start().len());
        match key {
            "m" | "r" => {
                let v: usize = value
                    .parse()
                    .map_err(|_| err(line, value_col, format!("`{key}` must be a positive integer")))?;
                if v == 0 {
                    return Err(err(line, value_col, format!("`{key}` must be at least 1")));
                }
                let slot = if key == "m" { &mut m } else { &mut r };
                if slot.is_some() {
                    return Err(err(line, key_col, format!("duplicate `{key}`")));
                }
                *slot = Some((v, line));
            }
            "label" => label = value.trim_matches('"').to_string(),
            "chart" => chart = Some(Pending { line, col: value_col, text: value.to_string() }),
            "K" => {
                let Some(args) = value
                    .strip_prefix("bergman")
                    .map(str::trim_start)
                    .and_then(|s| s.strip_prefix('('))
                    .and_then(|s| s.trim_end().strip_suffix(')'))
                else {
                    return Err(err(line, value_col, "expected `bergman(a1, ..., am)`"));
                };
                let weights = args
                    .split(',')
                    .map(|w| w.trim().parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| err(line, value_col, "bergman weights must be real numbers"))?;
                bergman = Some((line, weights));
            }
            _ => {
                let Some((i, j)) = parse_cell_key(key) else {
                    return Err(err(line, key_col, format!("unknown key `{key}`")));
                };
                if cells.iter().any(|(c, _)| *c == (i, j)) {
                    return Err(err(line, key_col, format!("duplicate entry K[{i}][{j}]")));
                }
                cells.push(((i, j), Pending { line, col: value_col, text: value.to_string() }));
            }
        }
    }

    let mut spec = if let Some((line, weights)) = bergman {
        if !cells.is_empty() {
            return Err(err(line, 1, "`K = bergman(...)` cannot be combined with K[i][j] entries"));
        }
        if let Some((mv, mline)) = m {
            if mv != weights.len() {
                return Err(err(mline, 1, format!("m = {mv} but bergman has {} weights", weights.len())));
            }
        }
        if let Some((rv, rline)) = r {
            if rv != 1 {
                return Err(err(rline, 1, "bergman kernels have rank 1"));
            }
        }
        let mut s = builtin_bergman(&weights).map_err(|e| err(line, 1, e.to_string()))?;
        if !label.is_empty() {
            s.label = label;
        }
        s
    } else {
        let (m, _) = m.ok_or_else(|| err(1, 1, "missing header `m = <int>`"))?;
        let (r, _) = r.ok_or_else(|| err(1, 1, "missing header `r = <int>`"))?;
        let mut entries = vec![None; r * r];
        for ((i, j), p) in &cells {
            if *i == 0 || *j == 0 || *i > r || *j > r {
                return Err(err(p.line, 1, format!("entry K[{i}][{j}] outside a {r}x{r} kernel")));
            }
            entries[(i - 1) * r + (j - 1)] = Some(parse_expr_at(&p.text, m, p.line, p.col)?);
        }
        let entries = entries
            .into_iter()
            .enumerate()
            .map(|(n, e)| e.ok_or_else(|| err(1, 1, format!("missing entry K[{}][{}]", n / r + 1, n % r + 1))))
            .collect::<Result<Vec<_>, _>>()?;
        KernelSpec::new(m, r, entries, &label).map_err(|e| err(1, 1, e.to_string()))?
    };
    if let Some(p) = chart {
        let c = AffineChart::parse(&p.text, spec.m).map_err(|e| err(p.line, p.col, e.to_string()))?;
        spec.chart = Some(c);
    }
    Ok(spec)
}

fn parse_cell_key(key: &str) -> Option<(usize, usize)> {
    let rest = key.strip_prefix('K')?.trim_start().strip_prefix('[')?;
    let (i, rest) = rest.split_once(']')?;
    let rest = rest.trim_start().strip_prefix('[')?;
    let (j, rest) = rest.split_once(']')?;
    if !rest.trim().is_empty() {
        return None;
    }
    Some((i.trim().parse().ok()?, j.trim().parse().ok()?))
}
