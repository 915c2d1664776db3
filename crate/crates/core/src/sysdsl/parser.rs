use crate::error::{Error, Result};
use crate::space::MetricSpec;

use super::expr::{BinOp, CmpOp, Expr, Func, Predicate};
use super::{EdgeSpec, SystemSpec};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    LParen,
    RParen,
    Comma,
    Colon,
    Arrow,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Eq,
    Le,
    Ge,
    Lt,
    Gt,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
    text: String,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex_line(line_no: usize, line: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
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
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text
                .parse()
                .map_err(|_| syntax(line_no, col, format!("malformed number `{text}`")))?;
            out.push(Token { tok: Tok::Num(v), col, text });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            out.push(Token { tok: Tok::Ident(text.clone()), col, text });
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let (tok, len) = match two.as_str() {
            "->" => (Tok::Arrow, 2),
            "<=" => (Tok::Le, 2),
            ">=" => (Tok::Ge, 2),
            _ => (
                match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    ':' => Tok::Colon,
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '^' => Tok::Caret,
                    '=' => Tok::Eq,
                    '<' => Tok::Lt,
                    '>' => Tok::Gt,
                    _ => return Err(syntax(line_no, col, format!("unexpected character `{c}`"))),
                },
                1,
            ),
        };
        out.push(Token {
            tok,
            col,
            text: chars[i..i + len].iter().collect(),
        });
        i += len;
    }
    Ok(out)
}

/// A variable reference recorded for later checking against the dimension.
#[derive(Debug, Clone)]
struct VarRef {
    index: usize,
    alias: bool,
    line: usize,
    col: usize,
}

struct LineParser<'a> {
    toks: &'a [Token],
    pos: usize,
    line: usize,
    end_col: usize,
    vars: &'a mut Vec<VarRef>,
}

impl<'a> LineParser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |t| t.col)
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        syntax(self.line, self.col(), msg)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        match self.peek() {
            Some(t) if *t == tok => {
                self.pos += 1;
                Ok(())
            }
            Some(_) => Err(self.err(format!("expected {what}, found `{}`", self.toks[self.pos].text))),
            None => Err(self.err(format!("expected {what} at end of line"))),
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<()> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected `{kw}`"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn integer(&mut self, what: &str) -> Result<usize> {
        let col = self.col();
        match self.next() {
            Some(Token { tok: Tok::Num(v), .. }) if v.fract() == 0.0 && (0.0..1e15).contains(&v) => {
                Ok(v as usize)
            }
            _ => Err(syntax(self.line, col, format!("expected {what} (non-negative integer)"))),
        }
    }

    fn finish(&self) -> Result<()> {
        if self.pos < self.toks.len() {
            Err(self.err(format!("unexpected trailing `{}`", self.toks[self.pos].text)))
        } else {
            Ok(())
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.peek() != Some(&Tok::Caret) {
            return Ok(base);
        }
        self.pos += 1;
        let col = self.col();
        match self.next() {
            Some(Token { tok: Tok::Num(v), .. }) if v.fract() == 0.0 && (0.0..=1024.0).contains(&v) => {
                Ok(Expr::Pow(Box::new(base), v as u32))
            }
            _ => Err(syntax(
                self.line,
                col,
                "exponent must be a non-negative integer constant (at most 1024)",
            )),
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        let col = self.col();
        let Some(tok) = self.next() else {
            return Err(syntax(self.line, col, "expected expression at end of line"));
        };
        match tok.tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.peek() == Some(&Tok::LParen) {
                    let func = Func::from_name(&name)
                        .ok_or_else(|| syntax(self.line, col, format!("unknown function `{name}`")))?;
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while self.peek() == Some(&Tok::Comma) {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    let (lo, hi) = func.arity();
                    if args.len() < lo || args.len() > hi {
                        return Err(syntax(
                            self.line,
                            col,
                            format!("`{name}` takes {lo}{} argument(s), got {}",
                                if hi == usize::MAX { " or more" } else { "" },
                                args.len()),
                        ));
                    }
                    return Ok(Expr::Call(func, args));
                }
                let (index, alias) = match name.as_str() {
                    "x" => (0, true),
                    "y" => (1, true),
                    "z" => (2, true),
                    _ => match name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
                        Some(k) if k >= 1 => (k - 1, false),
                        _ => {
                            return Err(Error::Semantic(format!(
                                "line {}: unknown variable `{name}`",
                                self.line
                            )))
                        }
                    },
                };
                self.vars.push(VarRef {
                    index,
                    alias,
                    line: self.line,
                    col,
                });
                Ok(Expr::Var(index))
            }
            _ => Err(syntax(self.line, col, format!("unexpected `{}`", tok.text))),
        }
    }

    fn comparison(&mut self) -> Result<Predicate> {
        let a = self.expr()?;
        let op = match self.peek() {
            Some(Tok::Le) => CmpOp::Le,
            Some(Tok::Ge) => CmpOp::Ge,
            Some(Tok::Lt) => CmpOp::Lt,
            Some(Tok::Gt) => CmpOp::Gt,
            _ => return Err(self.err("expected comparison operator")),
        };
        self.pos += 1;
        let b = self.expr()?;
        Ok(Predicate::Cmp(a, op, b))
    }

    fn conjunction(&mut self) -> Result<Predicate> {
        let mut p = self.comparison()?;
        while matches!(self.peek(), Some(Tok::Ident(s)) if s == "and") {
            self.pos += 1;
            p = Predicate::And(Box::new(p), Box::new(self.comparison()?));
        }
        Ok(p)
    }

    fn predicate(&mut self) -> Result<Predicate> {
        let mut p = self.conjunction()?;
        while matches!(self.peek(), Some(Tok::Ident(s)) if s == "or") {
            self.pos += 1;
            p = Predicate::Or(Box::new(p), Box::new(self.conjunction()?));
        }
        Ok(p)
    }

    /// A variable-free expression evaluated on the spot.
    fn constant(&mut self, what: &str) -> Result<f64> {
        let col = self.col();
        let before = self.vars.len();
        let e = self.expr()?;
        if self.vars.len() != before {
            return Err(syntax(self.line, col, format!("{what} must be a constant")));
        }
        e.eval(&[])
    }
}

#[derive(Default)]
struct Draft {
    name: Option<String>,
    dim: Option<usize>,
    metric: Option<MetricSpec>,
    vertices: Option<usize>,
    vertexsets: Vec<(usize, Predicate, usize)>,
    representatives: Vec<(usize, Vec<f64>, usize)>,
    edges: Vec<(EdgeSpec, usize)>,
    delta: Option<f64>,
    rate: Option<f64>,
}

fn set_once<T>(slot: &mut Option<T>, value: T, what: &str, line: usize) -> Result<()> {
    if slot.is_some() {
        return Err(Error::Semantic(format!("line {line}: duplicate `{what}` declaration")));
    }
    *slot = Some(value);
    Ok(())
}

/// Parses a standalone expression over `dim` variables, such as a test
/// function given on the command line.
pub fn parse_expr(text: &str, dim: usize) -> Result<Expr> {
    let toks = lex_line(1, text)?;
    let mut vars = Vec::new();
    let mut p = LineParser {
        toks: &toks,
        pos: 0,
        line: 1,
        end_col: text.chars().count() + 1,
        vars: &mut vars,
    };
    let e = p.expr()?;
    p.finish()?;
    check_vars(&vars, dim)?;
    Ok(e)
}

fn check_vars(vars: &[VarRef], dim: usize) -> Result<()> {
    for v in vars {
        if v.alias && dim > 3 {
            return Err(Error::Semantic(format!(
                "line {}, column {}: aliases x, y, z need dimension at most 3",
                v.line, v.col
            )));
        }
        if v.index >= dim {
            return Err(Error::Semantic(format!(
                "line {}, column {}: variable x{} exceeds dimension {dim}",
                v.line,
                v.col,
                v.index + 1
            )));
        }
    }
    Ok(())
}

pub fn parse_system(text: &str) -> Result<SystemSpec> {
    let mut draft = Draft::default();
    let mut vars: Vec<VarRef> = Vec::new();
    let mut seen_header = false;

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let toks = lex_line(line, raw)?;
        if toks.is_empty() {
            continue;
        }
        let mut p = LineParser {
            toks: &toks,
            pos: 0,
            line,
            end_col: raw.chars().count() + 1,
            vars: &mut vars,
        };
        let keyword = p.ident("a declaration keyword")?;
        if !seen_header {
            if keyword != "system" {
                return Err(syntax(line, 1, "file must start with `system NAME`"));
            }
            draft.name = Some(p.ident("system name")?);
            p.finish()?;
            seen_header = true;
            continue;
        }
        match keyword.as_str() {
            "system" => return Err(syntax(line, 1, "duplicate `system` header")),
            "dim" => {
                let d = p.integer("dimension")?;
                if d == 0 {
                    return Err(Error::Semantic(format!("line {line}: dimension must be positive")));
                }
                set_once(&mut draft.dim, d, "dim", line)?;
            }
            "metric" => {
                let col = p.col();
                let m = match p.ident("metric name")?.as_str() {
                    "l1" => MetricSpec::L1,
                    "l2" => MetricSpec::L2,
                    "linf" => MetricSpec::Linf,
                    other => return Err(syntax(line, col, format!("unknown metric `{other}`"))),
                };
                set_once(&mut draft.metric, m, "metric", line)?;
            }
            "vertices" => {
                let n = p.integer("vertex count")?;
                if n == 0 {
                    return Err(Error::Semantic(format!("line {line}: vertex count must be positive")));
                }
                set_once(&mut draft.vertices, n, "vertices", line)?;
            }
            "vertexset" => {
                let v = p.integer("vertex index")?;
                p.expect(Tok::Eq, "`=`")?;
                let pred = p.predicate()?;
                draft.vertexsets.push((v, pred, line));
            }
            "representative" => {
                let v = p.integer("vertex index")?;
                p.expect(Tok::Eq, "`=`")?;
                p.expect(Tok::LParen, "`(`")?;
                let mut coords = vec![p.constant("coordinate")?];
                while p.peek() == Some(&Tok::Comma) {
                    p.pos += 1;
                    coords.push(p.constant("coordinate")?);
                }
                p.expect(Tok::RParen, "`)`")?;
                draft.representatives.push((v, coords, line));
            }
            "edge" => {
                let id = p.ident("edge id")?;
                p.expect(Tok::Colon, "`:`")?;
                let source = p.integer("source vertex")?;
                p.expect(Tok::Arrow, "`->`")?;
                let target = p.integer("target vertex")?;
                p.expect_keyword("map")?;
                p.expect(Tok::LParen, "`(`")?;
                let mut map = vec![p.expr()?];
                while p.peek() == Some(&Tok::Comma) {
                    p.pos += 1;
                    map.push(p.expr()?);
                }
                p.expect(Tok::RParen, "`)`")?;
                p.expect_keyword("prob")?;
                let prob = p.expr()?;
                draft.edges.push((
                    EdgeSpec {
                        id,
                        source,
                        target,
                        map,
                        prob,
                    },
                    line,
                ));
            }
            "delta" => {
                let v = p.constant("delta")?;
                set_once(&mut draft.delta, v, "delta", line)?;
            }
            "rate" => {
                let v = p.constant("rate")?;
                set_once(&mut draft.rate, v, "rate", line)?;
            }
            other => return Err(syntax(line, 1, format!("unknown declaration `{other}`"))),
        }
        p.finish()?;
    }

    if !seen_header {
        return Err(syntax(1, 1, "empty input; expected `system NAME`"));
    }
    finish(draft, &vars)
}

fn missing(what: &str) -> Error {
    Error::Semantic(format!("missing required `{what}` declaration"))
}

fn finish(d: Draft, vars: &[VarRef]) -> Result<SystemSpec> {
    let dim = d.dim.ok_or_else(|| missing("dim"))?;
    let metric = d.metric.ok_or_else(|| missing("metric"))?;
    let vertex_count = d.vertices.ok_or_else(|| missing("vertices"))?;
    let delta = d.delta.ok_or_else(|| missing("delta"))?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Semantic(format!("delta must lie in (0,1), got {delta}")));
    }
    if let Some(a) = d.rate {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::Semantic(format!("rate must lie in (0,1), got {a}")));
        }
    }
    check_vars(vars, dim)?;

    let in_range = |v: usize, line: usize, what: &str| {
        if v == 0 || v > vertex_count {
            Err(Error::Semantic(format!(
                "line {line}: {what} {v} outside 1..={vertex_count}"
            )))
        } else {
            Ok(())
        }
    };

    let mut vertex_sets: Vec<Option<Predicate>> = vec![None; vertex_count];
    for (v, pred, line) in d.vertexsets {
        in_range(v, line, "vertexset")?;
        if vertex_sets[v - 1].replace(pred).is_some() {
            return Err(Error::Semantic(format!("line {line}: vertexset {v} declared twice")));
        }
    }
    if vertex_count > 1 {
        if let Some(v) = vertex_sets.iter().position(Option::is_none) {
            return Err(Error::Semantic(format!(
                "vertexset {} is required when there is more than one vertex",
                v + 1
            )));
        }
    }

    let mut representatives: Vec<Option<Vec<f64>>> = vec![None; vertex_count];
    for (v, coords, line) in d.representatives {
        in_range(v, line, "representative")?;
        if coords.len() != dim {
            return Err(Error::Semantic(format!(
                "line {line}: representative has {} coordinates, dimension is {dim}",
                coords.len()
            )));
        }
        if let Some(pred) = &vertex_sets[v - 1] {
            if !pred.holds(&coords)? {
                return Err(Error::Semantic(format!(
                    "line {line}: representative {coords:?} lies outside vertexset {v}"
                )));
            }
        }
        if representatives[v - 1].replace(coords).is_some() {
            return Err(Error::Semantic(format!("line {line}: representative {v} declared twice")));
        }
    }
    let representatives = representatives
        .into_iter()
        .enumerate()
        .map(|(k, r)| r.ok_or_else(|| missing(&format!("representative {}", k + 1))))
        .collect::<Result<Vec<_>>>()?;

    if d.edges.is_empty() {
        return Err(missing("edge"));
    }
    let mut edges = Vec::with_capacity(d.edges.len());
    for (e, line) in d.edges {
        in_range(e.source, line, "edge source")?;
        in_range(e.target, line, "edge target")?;
        if e.map.len() != dim {
            return Err(Error::Semantic(format!(
                "line {line}: map of edge `{}` has {} components, dimension is {dim}",
                e.id,
                e.map.len()
            )));
        }
        if edges.iter().any(|f: &EdgeSpec| f.id == e.id) {
            return Err(Error::Semantic(format!("line {line}: duplicate edge id `{}`", e.id)));
        }
        edges.push(e);
    }
    for v in 1..=vertex_count {
        if !edges.iter().any(|e| e.source == v) {
            return Err(Error::Semantic(format!(
                "vertex {v} has no outgoing edge (source map is not surjective)"
            )));
        }
    }

    Ok(SystemSpec {
        name: d.name.expect("header parsed"),
        dim,
        metric,
        vertex_count,
        vertex_sets,
        representatives,
        edges,
        delta,
        rate: d.rate,
    })
}
