//! Hand-rolled lexer and recursive-descent parser for the model text format.

use super::{ModelError, Node, ProcessModel, TaskNode, MAX_LOOP_COUNT};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    LBrace,
    RBrace,
    Semi,
    Eq,
}

#[derive(Clone, Copy, Debug)]
struct Pos {
    line: usize,
    col: usize,
}

fn syntax(pos: Pos, message: impl Into<String>) -> ModelError {
    ModelError::Syntax {
        line: pos.line,
        col: pos.col,
        message: message.into(),
    }
}

struct Lexer<'a> {
    src: std::iter::Peekable<std::str::Chars<'a>>,
    pos: Pos,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            src: text.chars().peekable(),
            pos: Pos { line: 1, col: 1 },
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.src.next()?;
        if c == '\n' {
            self.pos.line += 1;
            self.pos.col = 1;
        } else {
            self.pos.col += 1;
        }
        Some(c)
    }

    fn tokens(mut self) -> Result<Vec<(Tok, Pos)>, ModelError> {
        let mut out = Vec::new();
        loop {
            while let Some(&c) = self.src.peek() {
                if c.is_whitespace() {
                    self.bump();
                } else if c == '#' {
                    while let Some(&c) = self.src.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                } else {
                    break;
                }
            }
            let start = self.pos;
            let Some(c) = self.bump() else { break };
            let tok = match c {
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                ';' => Tok::Semi,
                '=' => Tok::Eq,
                '"' => {
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            Some('"') => break,
                            Some('\\') => match self.bump() {
                                Some('"') => s.push('"'),
                                Some('\\') => s.push('\\'),
                                Some('n') => s.push('\n'),
                                other => {
                                    return Err(syntax(
                                        start,
                                        format!("bad escape {other:?} in string"),
                                    ))
                                }
                            },
                            Some('\n') | None => {
                                return Err(syntax(start, "unterminated string"));
                            }
                            Some(c) => s.push(c),
                        }
                    }
                    Tok::Str(s)
                }
                c if c.is_ascii_digit() || c == '-' || c == '.' => {
                    let mut s = String::from(c);
                    while let Some(&c) = self.src.peek() {
                        if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || c == '-' {
                            s.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    let n: f64 = s
                        .parse()
                        .map_err(|_| syntax(start, format!("bad number '{s}'")))?;
                    Tok::Num(n)
                }
                c if c.is_alphabetic() || c == '_' => {
                    let mut s = String::from(c);
                    while let Some(&c) = self.src.peek() {
                        if c.is_alphanumeric() || c == '_' || c == '-' {
                            s.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    Tok::Ident(s)
                }
                c => return Err(syntax(start, format!("unexpected character '{c}'"))),
            };
            out.push((tok, start));
        }
        Ok(out)
    }
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    i: usize,
    signal_counter: u32,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks
            .get(self.i.min(self.toks.len().saturating_sub(1)))
            .map(|&(_, p)| p)
            .unwrap_or(Pos { line: 1, col: 1 })
    }

    fn next(&mut self) -> Result<(Tok, Pos), ModelError> {
        let item = self
            .toks
            .get(self.i)
            .cloned()
            .ok_or_else(|| syntax(self.pos(), "unexpected end of document"))?;
        self.i += 1;
        Ok(item)
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Pos, ModelError> {
        let (tok, pos) = self.next()?;
        if tok == want {
            Ok(pos)
        } else {
            Err(syntax(pos, format!("expected {what}, got {tok:?}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Pos), ModelError> {
        let (tok, pos) = self.next()?;
        match tok {
            Tok::Ident(s) => Ok((s, pos)),
            other => Err(syntax(pos, format!("expected {what}, got {other:?}"))),
        }
    }

    fn model_block(&mut self) -> Result<ProcessModel, ModelError> {
        let (kw, pos) = self.ident("'model'")?;
        if kw != "model" {
            return Err(syntax(pos, format!("expected 'model', got '{kw}'")));
        }
        let (model_id, _) = self.ident("model id")?;
        let (vtok, vpos) = self.ident("version marker like 'v1'")?;
        let version: u64 = vtok
            .strip_prefix('v')
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                syntax(
                    vpos,
                    format!("expected version marker like 'v1', got '{vtok}'"),
                )
            })?;
        self.expect(Tok::LBrace, "'{'")?;
        let root = self.node()?;
        self.expect(Tok::RBrace, "'}'")?;
        Ok(ProcessModel {
            model_id,
            version,
            root,
        })
    }

    fn node(&mut self) -> Result<Node, ModelError> {
        let (kw, pos) = self.ident("node constructor")?;
        match kw.as_str() {
            "seq" => {
                let children = self.block_stmts()?;
                if children.is_empty() {
                    return Err(ModelError::EmptySequence);
                }
                Ok(Node::Sequence(children))
            }
            "par" => {
                let children = self.block_stmts()?;
                if children.is_empty() {
                    return Err(ModelError::EmptyParallel);
                }
                Ok(Node::Parallel(children))
            }
            "loop" => {
                let (tok, npos) = self.next()?;
                let count = match tok {
                    Tok::Num(n)
                        if n.fract() == 0.0 && n >= 1.0 && n <= f64::from(MAX_LOOP_COUNT) =>
                    {
                        n as u32
                    }
                    Tok::Num(n) => {
                        return Err(ModelError::BadLoopCount {
                            got: n.max(0.0) as u64,
                        })
                    }
                    other => {
                        return Err(syntax(npos, format!("expected loop count, got {other:?}")))
                    }
                };
                let body = self.block_stmts()?;
                let body = match body.len() {
                    0 => return Err(ModelError::EmptySequence),
                    1 => body.into_iter().next().unwrap(),
                    _ => Node::Sequence(body),
                };
                Ok(Node::Loop {
                    count,
                    body: Box::new(body),
                })
            }
            "task" => self.task_node(),
            "call" => {
                let (model_id, _) = self.ident("model id")?;
                let mut correlate = true;
                for (key, value, vpos) in self.options()? {
                    match key.as_str() {
                        "correlate" => match value {
                            OptValue::Ident(s) if s == "true" => correlate = true,
                            OptValue::Ident(s) if s == "false" => correlate = false,
                            _ => return Err(syntax(vpos, "correlate expects true or false")),
                        },
                        other => return Err(syntax(vpos, format!("unknown key '{other}'"))),
                    }
                }
                Ok(Node::SubprocessCall {
                    model_id,
                    correlate_to_root: correlate,
                })
            }
            "signal" => {
                let (tok, spos) = self.next()?;
                let label = match tok {
                    Tok::Str(s) => s,
                    other => {
                        return Err(syntax(
                            spos,
                            format!("expected signal label string, got {other:?}"),
                        ))
                    }
                };
                let mut task_id = None;
                for (key, value, vpos) in self.options()? {
                    match key.as_str() {
                        "id" => match value {
                            OptValue::Ident(s) => task_id = Some(s),
                            _ => return Err(syntax(vpos, "id expects an identifier")),
                        },
                        other => return Err(syntax(vpos, format!("unknown key '{other}'"))),
                    }
                }
                let task_id = task_id.unwrap_or_else(|| {
                    self.signal_counter += 1;
                    format!("__sig{}", self.signal_counter)
                });
                Ok(Node::Signal { task_id, label })
            }
            other => Err(syntax(pos, format!("unknown node constructor '{other}'"))),
        }
    }

    fn task_node(&mut self) -> Result<Node, ModelError> {
        let (task_id, _) = self.ident("task id")?;
        let mut task = TaskNode::new(task_id);
        if let Some(Tok::Str(_)) = self.peek() {
            let (tok, _) = self.next()?;
            if let Tok::Str(label) = tok {
                task.label = label;
            }
        }
        for (key, value, vpos) in self.options()? {
            match key.as_str() {
                "dur" => {
                    let d = value.num(vpos, "dur")?;
                    if d < 0.0 {
                        return Err(ModelError::NegativeDuration(task.task_id));
                    }
                    task.expected_duration = Some(d);
                }
                "gap" => {
                    let g = value.num(vpos, "gap")?;
                    if g < 0.0 {
                        return Err(ModelError::NegativeDuration(task.task_id));
                    }
                    task.expected_gap_after = Some(g);
                }
                "series" => match value {
                    OptValue::Ident(s) => task.reference_series_id = Some(s),
                    _ => return Err(syntax(vpos, "series expects an identifier")),
                },
                other => return Err(syntax(vpos, format!("unknown key '{other}'"))),
            }
        }
        Ok(Node::Task(task))
    }

    /// `key=value` pairs following a task/call/signal head.
    fn options(&mut self) -> Result<Vec<(String, OptValue, Pos)>, ModelError> {
        let mut out = Vec::new();
        while let Some(Tok::Ident(_)) = self.peek() {
            // Only consume if an '=' follows; otherwise it is the next stmt.
            if !matches!(self.toks.get(self.i + 1).map(|(t, _)| t), Some(Tok::Eq)) {
                break;
            }
            let (key, kpos) = self.ident("option key")?;
            self.expect(Tok::Eq, "'='")?;
            let (tok, _) = self.next()?;
            let value = match tok {
                Tok::Num(n) => OptValue::Num(n),
                Tok::Ident(s) => OptValue::Ident(s),
                Tok::Str(s) => OptValue::Ident(s),
                other => return Err(syntax(kpos, format!("bad option value {other:?}"))),
            };
            out.push((key, value, kpos));
        }
        Ok(out)
    }

    fn block_stmts(&mut self) -> Result<Vec<Node>, ModelError> {
        self.expect(Tok::LBrace, "'{'")?;
        let mut out = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::RBrace) => {
                    self.next()?;
                    break;
                }
                Some(Tok::Semi) => {
                    self.next()?;
                }
                Some(_) => out.push(self.node()?),
                None => {
                    return Err(syntax(
                        self.pos(),
                        "unexpected end of document, expected '}'",
                    ))
                }
            }
        }
        Ok(out)
    }
}

enum OptValue {
    Num(f64),
    Ident(String),
}

impl OptValue {
    fn num(&self, pos: Pos, key: &str) -> Result<f64, ModelError> {
        match self {
            OptValue::Num(n) => Ok(*n),
            _ => Err(syntax(pos, format!("{key} expects a number"))),
        }
    }
}

/// Parses a document of one or more `model` blocks. Performs syntax-level
/// checks only; set-level validation happens in [`super::ModelSet::new`].
pub fn parse_document(text: &str) -> Result<Vec<ProcessModel>, ModelError> {
    let toks = Lexer::new(text).tokens()?;
    let mut parser = Parser {
        toks,
        i: 0,
        signal_counter: 0,
    };
    let mut models = Vec::new();
    while parser.peek().is_some() {
        // Signal auto-ids restart per model block so serialization is stable
        // regardless of block order.
        parser.signal_counter = 0;
        models.push(parser.model_block()?);
    }
    if models.is_empty() {
        return Err(ModelError::NoModels);
    }
    Ok(models)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nested_constructors() {
        let doc = r#"
            # daily production
            model daily v2 {
              seq {
                task check "Check Machine" dur=10 gap=1.5;
                signal "part";
                par { task b; task c };
                loop 3 { task d; task e }
              }
            }
        "#;
        let models = parse_document(doc).unwrap();
        assert_eq!(models.len(), 1);
        let m = &models[0];
        assert_eq!(m.version, 2);
        let Node::Sequence(children) = &m.root else {
            panic!("expected seq")
        };
        assert_eq!(children.len(), 4);
        assert!(matches!(&children[1], Node::Signal { task_id, .. } if task_id == "__sig1"));
        assert!(matches!(&children[3], Node::Loop { count: 3, .. }));
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_document("model demo v1 {\n  task }").unwrap_err();
        match err {
            ModelError::Syntax { line, col, .. } => {
                assert_eq!(line, 2);
                assert!(col > 1);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let err = parse_document("model demo v1 { task a speed=3 }").unwrap_err();
        assert!(matches!(err, ModelError::Syntax { .. }));
    }

    #[test]
    fn negative_duration_rejected_at_parse() {
        let err = parse_document("model demo v1 { task a dur=-1 }").unwrap_err();
        assert_eq!(err, ModelError::NegativeDuration("a".into()));
    }

    #[test]
    fn loop_count_zero_rejected() {
        let err = parse_document("model demo v1 { loop 0 { task a } }").unwrap_err();
        assert_eq!(err, ModelError::BadLoopCount { got: 0 });
    }
}
