//! Text format for graphs, input collections and node lists.
//!
//! ```text
//! # Figure 1
//! graph {
//!   nodes: X1 X2 Y1 Y2;
//!   X1 -> Y1;
//!   X2 -> Y2;
//!   X1 <-> X2;
//!   X1 <-> Y1;
//! }
//! ```
//!
//! Latent variables may be declared explicitly with `latent U -> A B;`
//! instead of writing bidirected edges; such documents are projected onto
//! their observed nodes. The two styles cannot be mixed in one document.
//! Statements may appear in any order, so edges can mention nodes declared
//! further down.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::gid::QSpec;
use crate::graph::{is_valid_name, CausalGraph, GraphError, RawLatentGraph};
use crate::nodeset::NodeSet;

/// A region of the source text. Lines and columns start at 1; columns count
/// characters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Span {
    pub offset: usize,
    pub len: usize,
    pub line: usize,
    pub col: usize,
}

impl Default for Span {
    fn default() -> Self {
        Span {
            offset: 0,
            len: 0,
            line: 1,
            col: 1,
        }
    }
}

impl Span {
    fn to(self, end: Span) -> Span {
        Span {
            len: (end.offset + end.len).saturating_sub(self.offset),
            ..self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Syntax,
    InvalidName,
    UnknownNode,
    DuplicateNode,
    DuplicateEdge,
    SelfLoop,
    Cycle,
    LatentParent,
    MixedLatents,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub kind: ErrorKind,
    pub span: Span,
    pub message: String,
}

impl ParseError {
    fn new(kind: ErrorKind, span: Span, message: impl Into<String>) -> Self {
        ParseError {
            kind,
            span,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}, column {}: {}",
            self.span.line, self.span.col, self.message
        )
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Word(String),
    Arrow,
    BiArrow,
    LBrace,
    RBrace,
    Colon,
    Semi,
    Comma,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "'{w}'"),
            Tok::Arrow => f.write_str("'->'"),
            Tok::BiArrow => f.write_str("'<->'"),
            Tok::LBrace => f.write_str("'{'"),
            Tok::RBrace => f.write_str("'}'"),
            Tok::Colon => f.write_str("':'"),
            Tok::Semi => f.write_str("';'"),
            Tok::Comma => f.write_str("','"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    let (mut line, mut col) = (1, 1);
    while let Some(&(offset, c)) = chars.peek() {
        let span = |len| Span {
            offset,
            len,
            line,
            col,
        };
        if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            col += 1;
            continue;
        }
        if c == '#' {
            while chars.next_if(|&(_, c)| c != '\n').is_some() {}
            continue;
        }
        if c.is_ascii_alphanumeric() || c == '_' {
            let mut word = String::new();
            while let Some((_, c)) = chars.next_if(|&(_, c)| c.is_ascii_alphanumeric() || c == '_')
            {
                word.push(c);
            }
            let n = word.len();
            out.push((Tok::Word(word), span(n)));
            col += n;
            continue;
        }
        let single = match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ':' => Some(Tok::Colon),
            ';' => Some(Tok::Semi),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            chars.next();
            out.push((tok, span(1)));
            col += 1;
            continue;
        }
        let rest = &text[offset..];
        if rest.starts_with("->") {
            out.push((Tok::Arrow, span(2)));
            chars.nth(1);
            col += 2;
        } else if rest.starts_with("<->") {
            out.push((Tok::BiArrow, span(3)));
            chars.nth(2);
            col += 3;
        } else {
            return Err(ParseError::new(
                ErrorKind::Syntax,
                span(c.len_utf8()),
                format!("unexpected character {c:?}"),
            ));
        }
    }
    let end = Span {
        offset: text.len(),
        len: 0,
        line,
        col,
    };
    out.push((Tok::Eof, end));
    Ok(out)
}

/// A name occurrence in the source.
#[derive(Clone, Debug)]
struct Name {
    text: String,
    span: Span,
}

#[derive(Clone, Debug)]
struct EdgeStmt {
    from: Name,
    to: Name,
    bidirected: bool,
    span: Span,
}

#[derive(Default)]
struct Ast {
    observed: Vec<Name>,
    latent: Vec<Name>,
    edges: Vec<EdgeStmt>,
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &(Tok, Span) {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].0
    }

    fn next(&mut self) -> (Tok, Span) {
        let t = self.peek().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        let (tok, span) = self.peek();
        ParseError::new(
            ErrorKind::Syntax,
            *span,
            format!("expected {wanted}, found {tok}"),
        )
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<Span, ParseError> {
        if self.peek().0 == tok {
            Ok(self.next().1)
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn name(&mut self) -> Result<Name, ParseError> {
        match self.peek().clone() {
            (Tok::Word(w), span) => {
                if !is_valid_name(&w) {
                    return Err(ParseError::new(
                        ErrorKind::InvalidName,
                        span,
                        format!("invalid node name '{w}': names start with a letter"),
                    ));
                }
                self.next();
                Ok(Name { text: w, span })
            }
            _ => Err(self.unexpected("a node name")),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<Span, ParseError> {
        match self.peek() {
            (Tok::Word(w), span) if w == kw => {
                let span = *span;
                self.next();
                Ok(span)
            }
            _ => Err(self.unexpected(&format!("'{kw}'"))),
        }
    }

    fn document(&mut self) -> Result<Ast, ParseError> {
        let mut ast = Ast::default();
        self.keyword("graph")?;
        self.expect(Tok::LBrace, "'{'")?;
        loop {
            match (&self.peek().0, self.peek2()) {
                (Tok::RBrace, _) => {
                    self.next();
                    break;
                }
                (Tok::Word(w), Tok::Colon) if w == "nodes" => {
                    self.next();
                    self.next();
                    while let Tok::Word(_) = self.peek().0 {
                        ast.observed.push(self.name()?);
                        if self.peek().0 == Tok::Comma {
                            self.next();
                        }
                    }
                    self.expect(Tok::Semi, "a node name or ';'")?;
                }
                (Tok::Word(w), Tok::Word(_)) if w == "latent" => {
                    let start = self.next().1;
                    let u = self.name()?;
                    ast.latent.push(u.clone());
                    if self.peek().0 == Tok::Arrow {
                        self.next();
                        loop {
                            let child = self.name()?;
                            let span = start.to(child.span);
                            ast.edges.push(EdgeStmt {
                                from: u.clone(),
                                to: child,
                                bidirected: false,
                                span,
                            });
                            if let Tok::Word(_) = self.peek().0 {
                                continue;
                            }
                            break;
                        }
                    }
                    self.expect(Tok::Semi, "a node name or ';'")?;
                }
                (Tok::Word(_), _) => {
                    let from = self.name()?;
                    let bidirected = match self.next() {
                        (Tok::Arrow, _) => false,
                        (Tok::BiArrow, _) => true,
                        (tok, span) => {
                            return Err(ParseError::new(
                                ErrorKind::Syntax,
                                span,
                                format!("expected '->' or '<->', found {tok}"),
                            ))
                        }
                    };
                    let to = self.name()?;
                    let span = from.span.to(to.span);
                    self.expect(Tok::Semi, "';'")?;
                    ast.edges.push(EdgeStmt {
                        from,
                        to,
                        bidirected,
                        span,
                    });
                }
                _ => return Err(self.unexpected("a statement or '}'")),
            }
        }
        self.expect(Tok::Eof, "end of input")?;
        Ok(ast)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GraphBody {
    Causal(CausalGraph),
    Latent(RawLatentGraph),
}

/// A parsed graph together with where its parts were written.
#[derive(Clone, Debug)]
pub struct GraphDoc {
    pub body: GraphBody,
    /// Declaration site of every node.
    pub node_spans: BTreeMap<String, Span>,
    /// Edge statements keyed by their rendering, such as `A -> B`.
    pub edge_spans: BTreeMap<String, Span>,
}

impl PartialEq for GraphDoc {
    fn eq(&self, other: &Self) -> bool {
        self.body == other.body
    }
}

impl GraphDoc {
    /// The graph over observed nodes, projecting latents away if needed.
    pub fn graph(&self) -> CausalGraph {
        match &self.body {
            GraphBody::Causal(g) => g.clone(),
            GraphBody::Latent(raw) => raw.latent_project().expect("validated when parsed"),
        }
    }

    pub fn render(&self) -> String {
        render(&self.body)
    }
}

fn edge_key(a: &str, b: &str, bidirected: bool) -> String {
    if bidirected {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        format!("{a} <-> {b}")
    } else {
        format!("{a} -> {b}")
    }
}

pub fn parse_graph(text: &str) -> Result<GraphDoc, ParseError> {
    let ast = Parser {
        toks: lex(text)?,
        pos: 0,
    }
    .document()?;

    let mut node_spans = BTreeMap::new();
    for n in ast.observed.iter().chain(&ast.latent) {
        if node_spans.insert(n.text.clone(), n.span).is_some() {
            return Err(ParseError::new(
                ErrorKind::DuplicateNode,
                n.span,
                format!("node {} declared more than once", n.text),
            ));
        }
    }
    let latent: BTreeSet<&str> = ast.latent.iter().map(|n| n.text.as_str()).collect();
    let mut edge_spans = BTreeMap::new();
    for e in &ast.edges {
        for end in [&e.from, &e.to] {
            if !node_spans.contains_key(&end.text) {
                return Err(ParseError::new(
                    ErrorKind::UnknownNode,
                    end.span,
                    format!("unknown node {}", end.text),
                ));
            }
        }
        if e.from.text == e.to.text {
            return Err(ParseError::new(
                ErrorKind::SelfLoop,
                e.span,
                format!("self-loop on {}", e.from.text),
            ));
        }
        let key = edge_key(&e.from.text, &e.to.text, e.bidirected);
        if edge_spans.insert(key.clone(), e.span).is_some() {
            return Err(ParseError::new(
                ErrorKind::DuplicateEdge,
                e.span,
                format!("duplicate edge {key}"),
            ));
        }
        if latent.contains(e.to.text.as_str()) {
            return Err(ParseError::new(
                ErrorKind::LatentParent,
                e.span,
                format!("latent {} cannot have a parent", e.to.text),
            ));
        }
        if e.bidirected && !latent.is_empty() {
            return Err(ParseError::new(
                ErrorKind::MixedLatents,
                e.span,
                "bidirected edges cannot be combined with latent declarations",
            ));
        }
    }

    let cycle_error = |err: GraphError| match err {
        GraphError::Cycle(names) => {
            let span = names
                .get(..2)
                .and_then(|w| edge_spans.get(&edge_key(&w[0], &w[1], false)))
                .copied()
                .unwrap_or_default();
            ParseError::new(
                ErrorKind::Cycle,
                span,
                format!("directed cycle: {}", names.join(" -> ")),
            )
        }
        other => ParseError::new(ErrorKind::Syntax, Span::default(), other.to_string()),
    };

    let body = if latent.is_empty() {
        let mut b = CausalGraph::builder().nodes(ast.observed.iter().map(|n| n.text.clone()));
        for e in &ast.edges {
            b = if e.bidirected {
                b.bidirected(e.from.text.clone(), e.to.text.clone())
            } else {
                b.directed(e.from.text.clone(), e.to.text.clone())
            };
        }
        GraphBody::Causal(b.build().map_err(cycle_error)?)
    } else {
        let observed: Vec<&str> = ast.observed.iter().map(|n| n.text.as_str()).collect();
        let latents: Vec<&str> = ast.latent.iter().map(|n| n.text.as_str()).collect();
        let directed: Vec<(&str, &str)> = ast
            .edges
            .iter()
            .map(|e| (e.from.text.as_str(), e.to.text.as_str()))
            .collect();
        let raw = RawLatentGraph::new(&observed, &latents, &directed).map_err(cycle_error)?;
        raw.latent_project().map_err(cycle_error)?;
        GraphBody::Latent(raw)
    };
    Ok(GraphDoc {
        body,
        node_spans,
        edge_spans,
    })
}

/// Canonical text for a graph body; parsing it gives the same body back.
pub fn render(body: &GraphBody) -> String {
    let mut out = String::from("graph {\n");
    let mut line = |s: String| {
        out.push_str("  ");
        out.push_str(&s);
        out.push('\n');
    };
    match body {
        GraphBody::Causal(g) => {
            let names = g.names_of(g.nodes());
            line(if names.is_empty() {
                "nodes: ;".into()
            } else {
                format!("nodes: {};", names.join(" "))
            });
            for (a, b) in g.directed_edges() {
                line(format!("{} -> {};", g.name(a), g.name(b)));
            }
            for (a, b) in g.bidirected_edges() {
                line(format!("{} <-> {};", g.name(a), g.name(b)));
            }
        }
        GraphBody::Latent(raw) => {
            let names: Vec<&str> = raw.observed().map(|n| n.as_str()).collect();
            line(if names.is_empty() {
                "nodes: ;".into()
            } else {
                format!("nodes: {};", names.join(" "))
            });
            for u in raw.latent() {
                let children: Vec<&str> =
                    raw.latent_children(u).iter().map(|c| c.as_str()).collect();
                if children.is_empty() {
                    line(format!("latent {u};"));
                } else {
                    line(format!("latent {u} -> {};", children.join(" ")));
                }
            }
            for (a, b) in raw.directed() {
                if !raw.is_latent(a.as_str()) {
                    line(format!("{a} -> {b};"));
                }
            }
        }
    }
    out.push_str("}\n");
    out
}

fn list_error(text: &str, offset: usize, kind: ErrorKind, message: String) -> ParseError {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    ParseError::new(
        kind,
        Span {
            offset,
            len: 0,
            line,
            col,
        },
        message,
    )
}

/// Comma-separated node names; blank text is the empty set.
pub fn parse_node_list(text: &str, g: &CausalGraph) -> Result<NodeSet, ParseError> {
    parse_list_at(text, 0, text, g)
}

fn parse_list_at(
    part: &str,
    base: usize,
    whole: &str,
    g: &CausalGraph,
) -> Result<NodeSet, ParseError> {
    let mut set = NodeSet::new();
    if part.trim().is_empty() {
        return Ok(set);
    }
    let mut offset = base;
    for item in part.split(',') {
        let name = item.trim();
        let at = offset + (item.len() - item.trim_start().len());
        offset += item.len() + 1;
        if name.is_empty() {
            return Err(list_error(
                whole,
                at,
                ErrorKind::Syntax,
                "empty name in list".into(),
            ));
        }
        let Some(v) = g.index_of(name) else {
            return Err(list_error(
                whole,
                at,
                ErrorKind::UnknownNode,
                format!("unknown node {name}"),
            ));
        };
        if !set.insert(v) {
            return Err(list_error(
                whole,
                at,
                ErrorKind::DuplicateNode,
                format!("{name} listed twice"),
            ));
        }
    }
    Ok(set)
}

/// Parses `A0=V; A1=Y,Z`. Labels are optional and default to `A<i>`. The
/// entry `V` on its own stands for every node of `g`.
pub fn parse_spec(text: &str, g: &CausalGraph) -> Result<QSpec, ParseError> {
    let mut entries: Vec<(String, NodeSet)> = Vec::new();
    let mut offset = 0;
    for (i, part) in text.split(';').enumerate() {
        let start = offset;
        offset += part.len() + 1;
        if part.trim().is_empty() {
            if i > 0 && text[start..].trim().is_empty() {
                // A trailing separator.
                continue;
            }
            return Err(list_error(
                text,
                start,
                ErrorKind::Syntax,
                "empty entry".into(),
            ));
        }
        let (label, body, body_at) = match part.split_once('=') {
            Some((l, b)) => (l.trim().to_string(), b, start + l.len() + 1),
            None => (format!("A{i}"), part, start),
        };
        if !is_valid_name(&label) {
            return Err(list_error(
                text,
                start,
                ErrorKind::InvalidName,
                format!("invalid label '{label}'"),
            ));
        }
        if entries.iter().any(|(l, _)| *l == label) {
            return Err(list_error(
                text,
                start,
                ErrorKind::DuplicateNode,
                format!("label {label} used twice"),
            ));
        }
        let set = if body.trim() == "V" {
            g.nodes().clone()
        } else {
            parse_list_at(body, body_at, text, g)?
        };
        if set.is_empty() {
            return Err(list_error(
                text,
                body_at,
                ErrorKind::Syntax,
                format!("input {label} is empty"),
            ));
        }
        if let Some((other, _)) = entries.iter().find(|(_, s)| *s == set) {
            return Err(list_error(
                text,
                body_at,
                ErrorKind::DuplicateNode,
                format!("inputs {other} and {label} are the same set"),
            ));
        }
        entries.push((label, set));
    }
    if entries.is_empty() {
        return Err(list_error(
            text,
            0,
            ErrorKind::Syntax,
            "no inputs given".into(),
        ));
    }
    Ok(QSpec::new(entries).expect("checked above"))
}

pub fn render_spec(spec: &QSpec, g: &CausalGraph) -> String {
    spec.entries()
        .iter()
        .map(|(label, set)| {
            if set == g.nodes() {
                format!("{label}=V")
            } else {
                format!("{label}={}", g.names_of(set).join(","))
            }
        })
        .collect::<Vec<_>>()
        .join("; ")
}
