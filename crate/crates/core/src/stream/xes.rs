//! XES XML export, import, and structural validation.
//!
//! The writer produces a canonical serialization: fixed prolog, fixed
//! extension/global/classifier prelude, two-space indentation, deterministic
//! attribute order. `import(export(log))` reconstructs the log exactly and a
//! re-export is byte-identical.
//!
//! Sensor series have no native XES type; they are encoded as a nested list
//! attribute: `<list key="...">` holding the unit string and a `points` list
//! whose children are float attributes keyed by offset in milliseconds.
//! Trace-level history (model descriptions, open flag, anomalies) uses
//! `case:`-prefixed attributes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::engine::AttrValue;
use crate::series::SensorSeries;

use super::log::ModelRecord;
use super::{Event, Lifecycle, Log, StreamError, Trace};

const TRACE_OPEN_KEY: &str = "case:open";
const TRACE_ANOMALIES_KEY: &str = "case:anomalies";
const TRACE_MODELS_KEY: &str = "case:models";
const SOURCE_INSTANCE_KEY: &str = "source:instance";
const PART_KEY: &str = "part";
const META_PREFIX: &str = "meta:";

// ---------------------------------------------------------------------------
// Timestamps
// ---------------------------------------------------------------------------

pub(crate) fn format_ts(ms: u64) -> String {
    let dt = chrono::DateTime::<chrono::Utc>::from_timestamp_millis(ms as i64)
        .expect("timestamp in range");
    dt.format("%Y-%m-%dT%H:%M:%S%.3f+00:00").to_string()
}

pub(crate) fn parse_ts(s: &str) -> Result<u64, StreamError> {
    let dt = chrono::DateTime::parse_from_rfc3339(s)
        .map_err(|e| StreamError::Xes(format!("bad timestamp '{s}': {e}")))?;
    let ms = dt.timestamp_millis();
    if ms < 0 {
        return Err(StreamError::Xes(format!("timestamp '{s}' before epoch")));
    }
    Ok(ms as u64)
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    out
}

struct XmlWriter {
    out: String,
    depth: usize,
}

impl XmlWriter {
    fn line(&mut self, s: &str) {
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn leaf(&mut self, tag: &str, attrs: &[(&str, &str)]) {
        let mut s = format!("<{tag}");
        for (k, v) in attrs {
            let _ = write!(s, " {k}=\"{}\"", escape(v));
        }
        s.push_str("/>");
        self.line(&s);
    }

    fn open(&mut self, tag: &str, attrs: &[(&str, &str)]) {
        let mut s = format!("<{tag}");
        for (k, v) in attrs {
            let _ = write!(s, " {k}=\"{}\"", escape(v));
        }
        s.push('>');
        self.line(&s);
        self.depth += 1;
    }

    fn close(&mut self, tag: &str) {
        self.depth -= 1;
        self.line(&format!("</{tag}>"));
    }

    fn string(&mut self, key: &str, value: &str) {
        self.leaf("string", &[("key", key), ("value", value)]);
    }

    fn float(&mut self, key: &str, value: f64) {
        self.leaf("float", &[("key", key), ("value", &value.to_string())]);
    }

    fn int(&mut self, key: &str, value: i64) {
        self.leaf("int", &[("key", key), ("value", &value.to_string())]);
    }

    fn boolean(&mut self, key: &str, value: bool) {
        self.leaf(
            "boolean",
            &[
                ("key", key),
                ("value", if value { "true" } else { "false" }),
            ],
        );
    }

    fn date(&mut self, key: &str, ms: u64) {
        self.leaf("date", &[("key", key), ("value", &format_ts(ms))]);
    }

    fn attr_value(&mut self, key: &str, value: &AttrValue) {
        match value {
            AttrValue::Str(s) => self.string(key, s),
            AttrValue::Num(n) => self.float(key, *n),
            AttrValue::Series(series) => {
                self.open("list", &[("key", key)]);
                self.string("unit", &series.unit);
                self.open("list", &[("key", "points")]);
                for &(off, v) in &series.points {
                    self.float(&off.to_string(), v);
                }
                self.close("list");
                self.close("list");
            }
        }
    }
}

/// Serializes the log as canonical XES XML.
pub fn export_xes(log: &Log) -> String {
    let mut w = XmlWriter {
        out: String::new(),
        depth: 0,
    };
    w.line(r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    w.open(
        "log",
        &[
            ("xes.version", "1.0"),
            ("xes.features", "nested-attributes"),
        ],
    );
    for (name, prefix) in [
        ("Concept", "concept"),
        ("Lifecycle", "lifecycle"),
        ("Time", "time"),
        ("Organizational", "org"),
    ] {
        let uri = format!("http://www.xes-standard.org/{prefix}.xesext");
        w.leaf(
            "extension",
            &[("name", name), ("prefix", prefix), ("uri", &uri)],
        );
    }
    w.open("global", &[("scope", "trace")]);
    w.string("concept:name", "");
    w.close("global");
    w.open("global", &[("scope", "event")]);
    w.string("concept:name", "");
    w.string("lifecycle:transition", "complete");
    w.date("time:timestamp", 0);
    w.close("global");
    w.leaf(
        "classifier",
        &[
            ("name", "activity"),
            ("keys", "concept:name lifecycle:transition"),
        ],
    );
    for (key, value) in &log.meta {
        w.string(&format!("{META_PREFIX}{key}"), value);
    }
    for trace in log.traces() {
        write_trace(&mut w, trace);
    }
    w.close("log");
    w.out
}

fn write_trace(w: &mut XmlWriter, trace: &Trace) {
    w.open("trace", &[]);
    w.string("concept:name", &trace.case);
    w.boolean(TRACE_OPEN_KEY, trace.open);
    if !trace.anomalies.is_empty() {
        w.open("list", &[("key", TRACE_ANOMALIES_KEY)]);
        for (i, a) in trace.anomalies.iter().enumerate() {
            w.string(&i.to_string(), a);
        }
        w.close("list");
    }
    if !trace.models.is_empty() {
        w.open("list", &[("key", TRACE_MODELS_KEY)]);
        for (i, m) in trace.models.iter().enumerate() {
            w.open("list", &[("key", &i.to_string())]);
            w.string("model", &m.model);
            w.int("version", m.version as i64);
            w.date("ts", m.ts);
            w.string("model_description", &m.model_description);
            w.close("list");
        }
        w.close("list");
    }
    for event in &trace.events {
        w.open("event", &[]);
        w.string("concept:name", &event.name);
        w.string(
            "lifecycle:transition",
            match event.lifecycle {
                Lifecycle::Start => "start",
                Lifecycle::Complete => "complete",
            },
        );
        w.date("time:timestamp", event.ts);
        if let Some(resource) = &event.resource {
            w.string("org:resource", resource);
        }
        w.string(SOURCE_INSTANCE_KEY, &event.source_instance);
        if let Some(part) = &event.part {
            w.string(PART_KEY, part);
        }
        for (key, value) in &event.attrs {
            w.attr_value(key, value);
        }
        w.close("event");
    }
    w.close("trace");
}

// ---------------------------------------------------------------------------
// Minimal XML reader (the canonical subset this module emits)
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub(crate) struct XmlEl {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<XmlEl>,
}

impl XmlEl {
    fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    fn key(&self) -> Option<&str> {
        self.attr("key")
    }
}

fn unescape(s: &str) -> Result<String, StreamError> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.char_indices();
    while let Some((i, c)) = chars.next() {
        if c != '&' {
            out.push(c);
            continue;
        }
        let rest = &s[i + 1..];
        let end = rest
            .find(';')
            .ok_or_else(|| StreamError::Xes("unterminated entity".into()))?;
        let entity = &rest[..end];
        match entity {
            "amp" => out.push('&'),
            "lt" => out.push('<'),
            "gt" => out.push('>'),
            "quot" => out.push('"'),
            "apos" => out.push('\''),
            e if e.starts_with("#x") || e.starts_with("#X") => {
                let code = u32::from_str_radix(&e[2..], 16)
                    .map_err(|_| StreamError::Xes(format!("bad char ref &{e};")))?;
                out.push(
                    char::from_u32(code)
                        .ok_or_else(|| StreamError::Xes(format!("bad char ref &{e};")))?,
                );
            }
            e if e.starts_with('#') => {
                let code: u32 = e[1..]
                    .parse()
                    .map_err(|_| StreamError::Xes(format!("bad char ref &{e};")))?;
                out.push(
                    char::from_u32(code)
                        .ok_or_else(|| StreamError::Xes(format!("bad char ref &{e};")))?,
                );
            }
            e => return Err(StreamError::Xes(format!("unknown entity &{e};"))),
        }
        for _ in 0..end + 1 {
            chars.next();
        }
    }
    Ok(out)
}

struct XmlParser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> XmlParser<'a> {
    fn err(&self, message: impl Into<String>) -> StreamError {
        StreamError::Xes(format!("offset {}: {}", self.pos, message.into()))
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(|c: char| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn parse_document(&mut self) -> Result<XmlEl, StreamError> {
        self.skip_ws();
        if self.src[self.pos..].starts_with("<?xml") {
            let end = self.src[self.pos..]
                .find("?>")
                .ok_or_else(|| self.err("unterminated xml declaration"))?;
            self.pos += end + 2;
        }
        self.skip_ws();
        let root = self.parse_element()?;
        self.skip_ws();
        if self.pos != self.src.len() {
            return Err(self.err("trailing content after root element"));
        }
        Ok(root)
    }

    fn parse_element(&mut self) -> Result<XmlEl, StreamError> {
        if !self.src[self.pos..].starts_with('<') {
            return Err(self.err("expected '<'"));
        }
        self.pos += 1;
        let name = self.parse_name()?;
        let mut attrs = Vec::new();
        loop {
            self.skip_ws();
            if self.src[self.pos..].starts_with("/>") {
                self.pos += 2;
                return Ok(XmlEl {
                    name,
                    attrs,
                    children: Vec::new(),
                });
            }
            if self.src[self.pos..].starts_with('>') {
                self.pos += 1;
                break;
            }
            let key = self.parse_name()?;
            self.skip_ws();
            if !self.src[self.pos..].starts_with('=') {
                return Err(self.err("expected '=' in attribute"));
            }
            self.pos += 1;
            self.skip_ws();
            if !self.src[self.pos..].starts_with('"') {
                return Err(self.err("expected '\"'"));
            }
            self.pos += 1;
            let end = self.src[self.pos..]
                .find('"')
                .ok_or_else(|| self.err("unterminated attribute value"))?;
            let raw = &self.src[self.pos..self.pos + end];
            self.pos += end + 1;
            attrs.push((key, unescape(raw)?));
        }
        let mut children = Vec::new();
        loop {
            self.skip_ws();
            if self.src[self.pos..].starts_with("</") {
                self.pos += 2;
                let closing = self.parse_name()?;
                self.skip_ws();
                if !self.src[self.pos..].starts_with('>') {
                    return Err(self.err("expected '>' in end tag"));
                }
                self.pos += 1;
                if closing != name {
                    return Err(self.err(format!("mismatched end tag </{closing}> for <{name}>")));
                }
                return Ok(XmlEl {
                    name,
                    attrs,
                    children,
                });
            }
            if self.src[self.pos..].starts_with('<') {
                children.push(self.parse_element()?);
            } else if self.pos >= self.src.len() {
                return Err(self.err(format!("unexpected end of input inside <{name}>")));
            } else {
                return Err(self.err("unexpected text content"));
            }
        }
    }

    fn parse_name(&mut self) -> Result<String, StreamError> {
        let start = self.pos;
        while self.src[self.pos..].starts_with(|c: char| {
            c.is_alphanumeric() || c == ':' || c == '.' || c == '-' || c == '_'
        }) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected a name"));
        }
        Ok(self.src[start..self.pos].to_string())
    }
}

pub(crate) fn parse_xml(xml: &str) -> Result<XmlEl, StreamError> {
    XmlParser { src: xml, pos: 0 }.parse_document()
}

// ---------------------------------------------------------------------------
// Import
// ---------------------------------------------------------------------------

fn attr_from_xml(el: &XmlEl) -> Result<(String, AttrValue), StreamError> {
    let key = el
        .key()
        .ok_or_else(|| StreamError::Xes(format!("<{}> without key", el.name)))?;
    let value = || {
        el.attr("value")
            .ok_or_else(|| StreamError::Xes(format!("'{key}' without value")))
    };
    let attr = match el.name.as_str() {
        "string" => AttrValue::Str(value()?.to_string()),
        "float" => AttrValue::Num(
            value()?
                .parse()
                .map_err(|e| StreamError::Xes(format!("bad float '{key}': {e}")))?,
        ),
        "int" => AttrValue::Num(
            value()?
                .parse::<i64>()
                .map_err(|e| StreamError::Xes(format!("bad int '{key}': {e}")))? as f64,
        ),
        "list" => AttrValue::Series(series_from_xml(el)?),
        other => {
            return Err(StreamError::Xes(format!(
                "unsupported attribute element <{other}>"
            )))
        }
    };
    Ok((key.to_string(), attr))
}

fn series_from_xml(el: &XmlEl) -> Result<SensorSeries, StreamError> {
    let unit = el
        .children
        .iter()
        .find(|c| c.name == "string" && c.key() == Some("unit"))
        .and_then(|c| c.attr("value"))
        .ok_or_else(|| StreamError::Xes("series list without unit".into()))?;
    let points_el = el
        .children
        .iter()
        .find(|c| c.name == "list" && c.key() == Some("points"))
        .ok_or_else(|| StreamError::Xes("series list without points".into()))?;
    let mut points = Vec::new();
    for p in &points_el.children {
        let off: u64 = p
            .key()
            .and_then(|k| k.parse().ok())
            .ok_or_else(|| StreamError::Xes("series point key must be an offset".into()))?;
        let v: f64 = p
            .attr("value")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| StreamError::Xes("series point without float value".into()))?;
        points.push((off, v));
    }
    SensorSeries::new(unit, points).map_err(|e| StreamError::Xes(e.to_string()))
}

fn event_from_xml(el: &XmlEl, case: &str) -> Result<Event, StreamError> {
    let mut name = None;
    let mut lifecycle = None;
    let mut ts = None;
    let mut resource = None;
    let mut source_instance = None;
    let mut part = None;
    let mut attrs = BTreeMap::new();
    for child in &el.children {
        let key = child
            .key()
            .ok_or_else(|| StreamError::Xes("event attribute without key".into()))?;
        match key {
            "concept:name" => name = child.attr("value").map(String::from),
            "lifecycle:transition" => {
                lifecycle = Some(match child.attr("value") {
                    Some("start") => Lifecycle::Start,
                    Some("complete") => Lifecycle::Complete,
                    other => {
                        return Err(StreamError::Xes(format!("bad lifecycle {other:?}")));
                    }
                })
            }
            "time:timestamp" => {
                ts = Some(parse_ts(child.attr("value").unwrap_or_default())?);
            }
            "org:resource" => resource = child.attr("value").map(String::from),
            SOURCE_INSTANCE_KEY => source_instance = child.attr("value").map(String::from),
            PART_KEY => part = child.attr("value").map(String::from),
            _ => {
                let (key, value) = attr_from_xml(child)?;
                attrs.insert(key, value);
            }
        }
    }
    let name = name.ok_or_else(|| StreamError::Xes("event without concept:name".into()))?;
    Ok(Event {
        case: case.to_string(),
        source_instance: source_instance.unwrap_or_else(|| case.to_string()),
        name,
        lifecycle: lifecycle
            .ok_or_else(|| StreamError::Xes("event without lifecycle:transition".into()))?,
        ts: ts.ok_or_else(|| StreamError::Xes("event without time:timestamp".into()))?,
        resource,
        attrs,
        part,
    })
}

fn model_record_from_xml(el: &XmlEl) -> Result<ModelRecord, StreamError> {
    let find = |name: &str, key: &str| {
        el.children
            .iter()
            .find(|c| c.name == name && c.key() == Some(key))
            .and_then(|c| c.attr("value"))
            .ok_or_else(|| StreamError::Xes(format!("model record without {key}")))
    };
    Ok(ModelRecord {
        model: find("string", "model")?.to_string(),
        version: find("int", "version")?
            .parse()
            .map_err(|e| StreamError::Xes(format!("bad version: {e}")))?,
        ts: parse_ts(find("date", "ts")?)?,
        model_description: find("string", "model_description")?.to_string(),
    })
}

/// Reads a log back from the canonical XES serialization of [`export_xes`].
pub fn import_xes(xml: &str) -> Result<Log, StreamError> {
    let root = parse_xml(xml)?;
    if root.name != "log" {
        return Err(StreamError::Xes(format!(
            "root element is <{}>, expected <log>",
            root.name
        )));
    }
    let mut log = Log::new();
    for child in &root.children {
        match child.name.as_str() {
            "extension" | "global" | "classifier" => {}
            "string" => {
                if let (Some(key), Some(value)) = (child.key(), child.attr("value")) {
                    if let Some(meta_key) = key.strip_prefix(META_PREFIX) {
                        log.meta.insert(meta_key.to_string(), value.to_string());
                    }
                }
            }
            "trace" => import_trace(&mut log, child)?,
            other => return Err(StreamError::Xes(format!("unexpected <{other}> in log"))),
        }
    }
    Ok(log)
}

fn import_trace(log: &mut Log, el: &XmlEl) -> Result<(), StreamError> {
    let case = el
        .children
        .iter()
        .find(|c| c.name == "string" && c.key() == Some("concept:name"))
        .and_then(|c| c.attr("value"))
        .ok_or_else(|| StreamError::Xes("trace without concept:name".into()))?
        .to_string();
    let mut open = true;
    let mut anomalies = Vec::new();
    let mut models = Vec::new();
    let mut events = Vec::new();
    for child in &el.children {
        match (child.name.as_str(), child.key()) {
            ("string", Some("concept:name")) => {}
            ("boolean", Some(TRACE_OPEN_KEY)) => {
                open = child.attr("value") == Some("true");
            }
            ("list", Some(TRACE_ANOMALIES_KEY)) => {
                for a in &child.children {
                    if let Some(v) = a.attr("value") {
                        anomalies.push(v.to_string());
                    }
                }
            }
            ("list", Some(TRACE_MODELS_KEY)) => {
                for rec in &child.children {
                    models.push(model_record_from_xml(rec)?);
                }
            }
            ("event", _) => events.push(event_from_xml(child, &case)?),
            (other, key) => {
                return Err(StreamError::Xes(format!(
                    "unexpected <{other} key={key:?}> in trace"
                )))
            }
        }
    }
    log.restore_trace(case, models, events, open, anomalies);
    Ok(())
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

const ATTRIBUTE_ELEMENTS: [&str; 7] = ["string", "date", "int", "float", "boolean", "id", "list"];

fn validate_attribute(el: &XmlEl, problems: &mut Vec<String>, path: &str) {
    if !ATTRIBUTE_ELEMENTS.contains(&el.name.as_str()) {
        problems.push(format!(
            "{path}: <{}> is not an XES attribute element",
            el.name
        ));
        return;
    }
    let Some(key) = el.key() else {
        problems.push(format!("{path}: <{}> lacks a key", el.name));
        return;
    };
    let path = format!("{path}/{key}");
    match el.name.as_str() {
        "list" => {
            for child in &el.children {
                validate_attribute(child, problems, &path);
            }
            return;
        }
        "date" => {
            if parse_ts(el.attr("value").unwrap_or_default()).is_err() {
                problems.push(format!("{path}: date value is not ISO-8601"));
            }
        }
        "int" => {
            if el
                .attr("value")
                .and_then(|v| v.parse::<i64>().ok())
                .is_none()
            {
                problems.push(format!("{path}: int value is not an integer"));
            }
        }
        "float" => {
            if el
                .attr("value")
                .and_then(|v| v.parse::<f64>().ok())
                .is_none()
            {
                problems.push(format!("{path}: float value is not a number"));
            }
        }
        "boolean" => {
            if !matches!(el.attr("value"), Some("true") | Some("false")) {
                problems.push(format!("{path}: boolean value must be true/false"));
            }
        }
        _ => {
            if el.attr("value").is_none() {
                problems.push(format!("{path}: missing value"));
            }
        }
    }
    if !el.children.is_empty() {
        problems.push(format!("{path}: non-list attribute with children"));
    }
}

fn validate_event(el: &XmlEl, problems: &mut Vec<String>, path: &str) {
    let mut keys = Vec::new();
    for child in &el.children {
        validate_attribute(child, problems, path);
        if let Some(k) = child.key() {
            keys.push(k);
        }
    }
    for required in ["concept:name", "lifecycle:transition", "time:timestamp"] {
        if !keys.contains(&required) {
            problems.push(format!("{path}: missing required {required}"));
        }
    }
}

/// Structural validation against the XES log/trace/event schema: element
/// nesting, required declarations on attributes, typed values, and the
/// event-level globals this library declares.
pub fn validate_xes(xml: &str) -> Result<(), StreamError> {
    let root = parse_xml(xml)?;
    let mut problems = Vec::new();
    if root.name != "log" {
        problems.push(format!("root element is <{}>, expected <log>", root.name));
    }
    if root.attr("xes.version").is_none() {
        problems.push("log lacks xes.version".into());
    }
    for child in &root.children {
        match child.name.as_str() {
            "extension" => {
                for required in ["name", "prefix", "uri"] {
                    if child.attr(required).is_none() {
                        problems.push(format!("extension lacks {required}"));
                    }
                }
            }
            "global" => {
                if !matches!(child.attr("scope"), Some("trace") | Some("event") | None) {
                    problems.push("global scope must be trace or event".into());
                }
                for attr in &child.children {
                    validate_attribute(attr, &mut problems, "global");
                }
            }
            "classifier" => {
                for required in ["name", "keys"] {
                    if child.attr(required).is_none() {
                        problems.push(format!("classifier lacks {required}"));
                    }
                }
            }
            "trace" => {
                let trace_path = "trace";
                for item in &child.children {
                    if item.name == "event" {
                        validate_event(item, &mut problems, &format!("{trace_path}/event"));
                    } else {
                        validate_attribute(item, &mut problems, trace_path);
                    }
                }
            }
            _ => validate_attribute(child, &mut problems, "log"),
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(StreamError::Xes(problems.join("; ")))
    }
}
