use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{is_identifier, CompositeTask, LeafTask, Operator, Position, TaskModel, TaskNode};
use crate::user_model::InterfaceTier;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{pos}: syntax error: {message}")]
    Syntax { pos: Position, message: String },
    #[error("{pos}: duplicate id '{id}'")]
    DuplicateId { pos: Position, id: String },
    #[error("{pos}: {operator} node '{id}' has {found} children, needs {}", operator.arity_rule())]
    ArityViolation {
        pos: Position,
        id: String,
        operator: Operator,
        found: usize,
    },
    #[error("{pos}: loop '{id}' needs a bound (bound=<n>, n >= 1)")]
    MissingLoopBound { pos: Position, id: String },
}

impl ParseError {
    pub fn position(&self) -> Position {
        match self {
            ParseError::Syntax { pos, .. }
            | ParseError::DuplicateId { pos, .. }
            | ParseError::ArityViolation { pos, .. }
            | ParseError::MissingLoopBound { pos, .. } => *pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Num(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Eq,
    Dot,
    Sep,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("'{w}'"),
            Tok::Str(_) => "string".into(),
            Tok::Num(n) => format!("number {n}"),
            Tok::LBrace => "'{'".into(),
            Tok::RBrace => "'}'".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::Eq => "'='".into(),
            Tok::Dot => "'.'".into(),
            Tok::Sep => "separator".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn syntax(pos: Position, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        pos,
        message: message.into(),
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, Position)>, ParseError> {
    let mut toks = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                column = 1;
            } else if c.is_some() {
                column += 1;
            }
            c
        }};
    }

    while let Some(&c) = chars.peek() {
        let pos = Position { line, column };
        match c {
            c if c.is_whitespace() => {
                bump!();
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump!();
                }
            }
            '{' | '}' | '[' | ']' | '=' | '.' | ';' | ',' => {
                bump!();
                let t = match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    '=' => Tok::Eq,
                    '.' => Tok::Dot,
                    _ => Tok::Sep,
                };
                toks.push((t, pos));
            }
            '"' => {
                bump!();
                let mut s = String::new();
                loop {
                    match bump!() {
                        None => return Err(syntax(pos, "unterminated string")),
                        Some('"') => break,
                        Some('\\') => match bump!() {
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            Some('"') => s.push('"'),
                            Some('\\') => s.push('\\'),
                            other => {
                                return Err(syntax(
                                    Position { line, column },
                                    format!("bad escape {:?}", other.unwrap_or(' ')),
                                ))
                            }
                        },
                        Some(c) => s.push(c),
                    }
                }
                toks.push((Tok::Str(s), pos));
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    let exp_sign =
                        matches!(c, '-' | '+') && matches!(s.chars().last(), Some('e' | 'E'));
                    if c.is_ascii_digit()
                        || c == '.'
                        || c == 'e'
                        || c == 'E'
                        || exp_sign
                        || (s.is_empty() && matches!(c, '-' | '+'))
                    {
                        s.push(c);
                        bump!();
                    } else {
                        break;
                    }
                }
                toks.push((Tok::Num(s), pos));
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        s.push(c);
                        bump!();
                    } else {
                        break;
                    }
                }
                toks.push((Tok::Word(s), pos));
            }
            other => return Err(syntax(pos, format!("unexpected character {other:?}"))),
        }
    }
    toks.push((Tok::Eof, Position { line, column }));
    Ok(toks)
}

#[derive(Debug)]
enum Value {
    Num(String),
    Str(String),
    List(Vec<String>),
}

struct Parser {
    toks: Vec<(Tok, Position)>,
    at: usize,
    ids: BTreeSet<String>,
    /// Unnamed composites awaiting a generated id, by pre-order position.
    unnamed: Vec<Vec<usize>>,
}

/// Parses task-model source text.
pub fn parse_model(source: &str) -> Result<TaskModel, ParseError> {
    let mut p = Parser {
        toks: lex(source)?,
        at: 0,
        ids: BTreeSet::new(),
        unnamed: Vec::new(),
    };
    let (name, version) = p.header()?;
    let mut root = p.node(&mut Vec::new())?;
    p.expect_eof()?;
    p.assign_generated_ids(&mut root);
    Ok(TaskModel {
        name,
        version,
        root,
    })
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.at + offset).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn pos(&self) -> Position {
        self.toks[self.at].1
    }

    fn next(&mut self) -> (Tok, Position) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<Position, ParseError> {
        let (t, pos) = self.next();
        if t == want {
            Ok(pos)
        } else {
            Err(syntax(
                pos,
                format!("expected {}, found {}", want.describe(), t.describe()),
            ))
        }
    }

    fn expect_eof(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Eof => Ok(()),
            t => Err(syntax(
                self.pos(),
                format!("expected end of input, found {}", t.describe()),
            )),
        }
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Word(x) if x == w)
    }

    fn header(&mut self) -> Result<(String, String), ParseError> {
        let mut name = String::from("untitled");
        let mut version = String::from("1");
        if self.is_word("model") {
            self.next();
            name = self.string()?;
            if self.is_word("version") {
                self.next();
                version = self.string()?;
            }
        }
        Ok((name, version))
    }

    fn string(&mut self) -> Result<String, ParseError> {
        match self.next() {
            (Tok::Str(s), _) => Ok(s),
            (t, pos) => Err(syntax(
                pos,
                format!("expected string, found {}", t.describe()),
            )),
        }
    }

    fn identifier(&mut self) -> Result<(String, Position), ParseError> {
        match self.next() {
            (Tok::Word(w), pos) if is_identifier(&w) => Ok((w, pos)),
            (Tok::Word(w), pos) => Err(syntax(
                pos,
                format!("'{w}' is not a valid identifier ([a-z][a-z0-9_]*)"),
            )),
            (t, pos) => Err(syntax(
                pos,
                format!("expected identifier, found {}", t.describe()),
            )),
        }
    }

    fn claim_id(&mut self, id: &str, pos: Position) -> Result<(), ParseError> {
        if self.ids.insert(id.to_string()) {
            Ok(())
        } else {
            Err(ParseError::DuplicateId {
                pos,
                id: id.to_string(),
            })
        }
    }

    /// `path` is the child-index path from the root, used to locate unnamed
    /// composites once all explicit ids are known.
    fn node(&mut self, path: &mut Vec<usize>) -> Result<TaskNode, ParseError> {
        match self.next() {
            (Tok::Word(w), _) if w == "leaf" => self.leaf(),
            (Tok::Word(w), pos) if w == "task" => self.composite(pos, path),
            (t, pos) => Err(syntax(
                pos,
                format!("expected 'leaf' or 'task', found {}", t.describe()),
            )),
        }
    }

    fn leaf(&mut self) -> Result<TaskNode, ParseError> {
        let (id, id_pos) = self.identifier()?;
        self.claim_id(&id, id_pos)?;
        self.expect(Tok::LBrace)?;
        let mut leaf = LeafTask::new(id, 0);
        let mut has_nominal = false;
        while *self.peek() != Tok::RBrace {
            let (key, key_pos) = self.attr_key()?;
            self.expect(Tok::Eq)?;
            let (value, vpos) = self.value()?;
            match key.as_str() {
                "nominal" => {
                    leaf.nominal_duration = positive_int(&value, vpos, "nominal")?;
                    has_nominal = true;
                }
                "weight" => leaf.weight = positive_real(&value, vpos)?,
                "desc" | "description" => leaf.description = as_string(value, vpos)?,
                "contexts" => match value {
                    Value::List(items) => leaf.context_refs = items,
                    _ => return Err(syntax(vpos, "contexts expects a list [a, b]")),
                },
                k => match k.strip_prefix("content.") {
                    Some(tier) => {
                        let tier = InterfaceTier::from_keyword(tier).ok_or_else(|| {
                            syntax(key_pos, format!("unknown interface tier '{tier}'"))
                        })?;
                        let key = as_string(value, vpos)?;
                        if leaf.content_keys.insert(tier, key).is_some() {
                            return Err(syntax(key_pos, format!("content.{tier} given twice")));
                        }
                    }
                    None => return Err(syntax(key_pos, format!("unknown leaf attribute '{k}'"))),
                },
            }
            self.skip_sep();
        }
        self.expect(Tok::RBrace)?;
        if !has_nominal {
            return Err(syntax(
                id_pos,
                format!("leaf '{}' is missing nominal=<seconds>", leaf.id),
            ));
        }
        Ok(TaskNode::Leaf(leaf))
    }

    fn composite(
        &mut self,
        task_pos: Position,
        path: &mut Vec<usize>,
    ) -> Result<TaskNode, ParseError> {
        let (op_word, op_pos) = match self.next() {
            (Tok::Word(w), pos) => (w, pos),
            (t, pos) => {
                return Err(syntax(
                    pos,
                    format!("expected operator, found {}", t.describe()),
                ))
            }
        };
        let operator = Operator::from_keyword(&op_word).ok_or_else(|| {
            syntax(
                op_pos,
                format!("unknown operator '{op_word}' (seq, choice, par, disable, opt, loop)"),
            )
        })?;

        let named = matches!(self.peek(), Tok::Word(_)) && *self.peek_at(1) != Tok::Eq;
        let id = if named {
            let (id, pos) = self.identifier()?;
            self.claim_id(&id, pos)?;
            id
        } else {
            self.unnamed.push(path.clone());
            String::new()
        };

        let mut loop_bound = None;
        let mut weight = 1.0;
        while *self.peek() != Tok::LBrace {
            let (key, key_pos) = self.attr_key()?;
            self.expect(Tok::Eq)?;
            let (value, vpos) = self.value()?;
            match key.as_str() {
                "bound" => loop_bound = Some(positive_int(&value, vpos, "bound")?),
                "weight" => weight = positive_real(&value, vpos)?,
                k => return Err(syntax(key_pos, format!("unknown task attribute '{k}'"))),
            }
            self.skip_sep();
        }
        self.expect(Tok::LBrace)?;
        let mut children = Vec::new();
        while *self.peek() != Tok::RBrace {
            path.push(children.len());
            let child = self.node(path)?;
            path.pop();
            children.push(child);
            self.skip_sep();
        }
        self.expect(Tok::RBrace)?;

        let label = if id.is_empty() {
            op_word.clone()
        } else {
            id.clone()
        };
        if !operator.arity_ok(children.len()) {
            return Err(ParseError::ArityViolation {
                pos: task_pos,
                id: label,
                operator,
                found: children.len(),
            });
        }
        match (operator, loop_bound) {
            (Operator::Loop, None) => {
                return Err(ParseError::MissingLoopBound {
                    pos: task_pos,
                    id: label,
                })
            }
            (op, Some(_)) if op != Operator::Loop => {
                return Err(syntax(
                    task_pos,
                    format!("bound is only valid on loop, not {op}"),
                ))
            }
            _ => {}
        }
        Ok(TaskNode::Composite(CompositeTask {
            id,
            operator,
            children,
            loop_bound,
            weight,
        }))
    }

    fn attr_key(&mut self) -> Result<(String, Position), ParseError> {
        let (first, pos) = match self.next() {
            (Tok::Word(w), pos) => (w, pos),
            (t, pos) => {
                return Err(syntax(
                    pos,
                    format!("expected attribute name, found {}", t.describe()),
                ))
            }
        };
        if *self.peek() == Tok::Dot {
            self.next();
            let (second, _) = match self.next() {
                (Tok::Word(w), pos) => (w, pos),
                (t, pos) => {
                    return Err(syntax(
                        pos,
                        format!("expected attribute name, found {}", t.describe()),
                    ))
                }
            };
            return Ok((format!("{first}.{second}"), pos));
        }
        Ok((first, pos))
    }

    fn value(&mut self) -> Result<(Value, Position), ParseError> {
        match self.next() {
            (Tok::Num(n), pos) => Ok((Value::Num(n), pos)),
            (Tok::Str(s), pos) => Ok((Value::Str(s), pos)),
            (Tok::LBracket, pos) => {
                let mut items = Vec::new();
                while *self.peek() != Tok::RBracket {
                    items.push(self.identifier()?.0);
                    self.skip_sep();
                }
                self.expect(Tok::RBracket)?;
                Ok((Value::List(items), pos))
            }
            (t, pos) => Err(syntax(
                pos,
                format!("expected value, found {}", t.describe()),
            )),
        }
    }

    fn skip_sep(&mut self) {
        while *self.peek() == Tok::Sep {
            self.next();
        }
    }

    fn assign_generated_ids(&mut self, root: &mut TaskNode) {
        let mut counters: BTreeMap<Operator, usize> = BTreeMap::new();
        let unnamed = std::mem::take(&mut self.unnamed);
        for path in unnamed {
            let mut node = &mut *root;
            for &i in &path {
                node = match node {
                    TaskNode::Composite(c) => &mut c.children[i],
                    TaskNode::Leaf(_) => unreachable!("path runs through composites"),
                };
            }
            if let TaskNode::Composite(c) = node {
                let n = counters.entry(c.operator).or_insert(0);
                let id = loop {
                    *n += 1;
                    let candidate = format!("{}_{}", c.operator.keyword(), n);
                    if !self.ids.contains(&candidate) {
                        break candidate;
                    }
                };
                self.ids.insert(id.clone());
                c.id = id;
            }
        }
    }
}

fn positive_int(v: &Value, pos: Position, what: &str) -> Result<u32, ParseError> {
    match v {
        Value::Num(n) => match n.parse::<u32>() {
            Ok(x) if x > 0 => Ok(x),
            _ => Err(syntax(
                pos,
                format!("{what} must be a positive integer, got {n}"),
            )),
        },
        _ => Err(syntax(pos, format!("{what} must be a positive integer"))),
    }
}

fn positive_real(v: &Value, pos: Position) -> Result<f64, ParseError> {
    match v {
        Value::Num(n) => match n.parse::<f64>() {
            Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
            _ => Err(syntax(
                pos,
                format!("weight must be a positive number, got {n}"),
            )),
        },
        _ => Err(syntax(pos, "weight must be a positive number")),
    }
}

fn as_string(v: Value, pos: Position) -> Result<String, ParseError> {
    match v {
        Value::Str(s) => Ok(s),
        _ => Err(syntax(pos, "expected a quoted string")),
    }
}
