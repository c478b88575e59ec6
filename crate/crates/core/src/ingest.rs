//! Graph file and manifest loading.
//!
//! The native format is line oriented:
//!
//! ```text
//! # comment
//! node <procedure> <module>
//! edge <caller> <callee>
//! ```
//!
//! Two import adapters share the same validation: a DOT subset (a `digraph`
//! whose node statements carry a `module="..."` attribute) and a JSON document
//! with `nodes` and `edges` arrays. Parsing is strict by default; lenient mode
//! drops offending lines and edges and reports how many were dropped.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{is_valid_name, CallGraph, CallGraphBuilder, ModelError, VersionSeries};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("version {version}: {at}: syntax error: {message}")]
    Syntax {
        version: String,
        at: String,
        message: String,
    },
    #[error("version {version}: {at}: unknown procedure `{name}`")]
    UnknownProcedure { version: String, at: String, name: String },
    #[error("version {version}: {at}: procedure `{name}` declared in module `{first}` and `{second}`")]
    ConflictingModule {
        version: String,
        at: String,
        name: String,
        first: String,
        second: String,
    },
    #[error("version {version}: no node declarations")]
    EmptyGraph { version: String },
    #[error("version {version}: file not found: {}", path.display())]
    MissingFile { version: String, path: PathBuf },
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest: {0}")]
    Manifest(String),
}

/// Input file syntax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphFormat {
    Native,
    Dot,
    Json,
}

impl GraphFormat {
    /// Guess from the file extension; anything unrecognised is native.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("dot" | "gv") => GraphFormat::Dot,
            Some("json") => GraphFormat::Json,
            _ => GraphFormat::Native,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    pub lenient: bool,
}

/// Counts of input discarded in lenient mode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DropCounts {
    pub malformed_lines: usize,
    pub unknown_endpoint_edges: usize,
    pub conflicting_declarations: usize,
}

impl DropCounts {
    pub fn total(&self) -> usize {
        self.malformed_lines + self.unknown_endpoint_edges + self.conflicting_declarations
    }
}

#[derive(Debug, Clone)]
pub struct ParsedGraph {
    pub graph: CallGraph,
    pub dropped: DropCounts,
}

/// One declaration pulled out of any input syntax, tagged with its location.
enum Decl {
    Node { name: String, module: String, at: String },
    Edge { caller: String, callee: String, at: String },
}

struct Collector<'a> {
    version: &'a str,
    lenient: bool,
    dropped: DropCounts,
}

impl Collector<'_> {
    fn syntax(&mut self, at: String, message: impl Into<String>) -> Result<(), IngestError> {
        if self.lenient {
            self.dropped.malformed_lines += 1;
            Ok(())
        } else {
            Err(IngestError::Syntax {
                version: self.version.to_string(),
                at,
                message: message.into(),
            })
        }
    }

    /// Nodes first, then edges, so declaration order in the file never matters.
    fn assemble(mut self, decls: Vec<Decl>) -> Result<ParsedGraph, IngestError> {
        let mut builder = CallGraphBuilder::new(self.version);
        let (nodes, edges): (Vec<_>, Vec<_>) = decls.into_iter().partition(|d| matches!(d, Decl::Node { .. }));
        for decl in nodes {
            let Decl::Node { name, module, at } = decl else {
                unreachable!()
            };
            if let Some(first) = builder.module_of(&name) {
                if first != module {
                    if self.lenient {
                        self.dropped.conflicting_declarations += 1;
                        continue;
                    }
                    return Err(IngestError::ConflictingModule {
                        version: self.version.to_string(),
                        at,
                        first: first.to_string(),
                        name,
                        second: module,
                    });
                }
            }
            if let Err(e) = builder.procedure(&name, &module) {
                self.syntax(at, e.to_string())?;
            }
        }
        for decl in edges {
            let Decl::Edge { caller, callee, at } = decl else {
                unreachable!()
            };
            if let Some(missing) = [&caller, &callee].into_iter().find(|n| !builder.is_declared(n)) {
                if self.lenient {
                    self.dropped.unknown_endpoint_edges += 1;
                    continue;
                }
                return Err(IngestError::UnknownProcedure {
                    version: self.version.to_string(),
                    at,
                    name: missing.clone(),
                });
            }
            if let Err(e) = builder.call(&caller, &callee) {
                self.syntax(at, e.to_string())?;
            }
        }
        let graph = builder.build().map_err(|e| match e {
            ModelError::EmptyGraph(version) => IngestError::EmptyGraph { version },
            other => IngestError::Syntax {
                version: self.version.to_string(),
                at: "end of input".into(),
                message: other.to_string(),
            },
        })?;
        Ok(ParsedGraph {
            graph,
            dropped: self.dropped,
        })
    }
}

/// Strict parse of a native graph file.
pub fn parse_graph_file(text: &str, version_label: &str) -> Result<CallGraph, IngestError> {
    parse_native(text, version_label, ParseOptions::default()).map(|p| p.graph)
}

pub fn parse_native(text: &str, version_label: &str, options: ParseOptions) -> Result<ParsedGraph, IngestError> {
    let mut collector = Collector {
        version: version_label,
        lenient: options.lenient,
        dropped: DropCounts::default(),
    };
    let mut decls = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let at = format!("line {}", i + 1);
        let fields: Vec<&str> = line.split_whitespace().collect();
        let decl = match fields.as_slice() {
            ["node", name, module] if is_valid_name(name) && is_valid_name(module) => Decl::Node {
                name: name.to_string(),
                module: module.to_string(),
                at,
            },
            ["edge", caller, callee] if is_valid_name(caller) && is_valid_name(callee) => Decl::Edge {
                caller: caller.to_string(),
                callee: callee.to_string(),
                at,
            },
            ["node" | "edge", _, _] => {
                collector.syntax(at, "names must not contain `#`")?;
                continue;
            }
            _ => {
                collector.syntax(
                    at,
                    format!("expected `node <name> <module>` or `edge <caller> <callee>`, got `{line}`"),
                )?;
                continue;
            }
        };
        decls.push(decl);
    }
    collector.assemble(decls)
}

/// Serialize to the native format. Output is sorted, so equal graphs give equal text.
pub fn to_native(cg: &CallGraph) -> String {
    let mut out = format!("# version {}\n", cg.version_label());
    for p in cg.procedures() {
        let _ = writeln!(out, "node {} {}", p.name, p.module);
    }
    for pair in cg.call_pairs() {
        let _ = writeln!(out, "edge {} {}", pair.caller, pair.callee);
    }
    for p in cg.self_loops() {
        let _ = writeln!(out, "edge {p} {p}");
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonGraph {
    #[serde(default)]
    version: Option<String>,
    nodes: Vec<JsonNode>,
    #[serde(default)]
    edges: Vec<JsonEdge>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonNode {
    name: String,
    module: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonEdge {
    caller: String,
    callee: String,
}

pub fn parse_json(text: &str, version_label: &str, options: ParseOptions) -> Result<ParsedGraph, IngestError> {
    let doc: JsonGraph = serde_json::from_str(text).map_err(|e| IngestError::Syntax {
        version: version_label.to_string(),
        at: format!("line {}", e.line()),
        message: e.to_string(),
    })?;
    let mut collector = Collector {
        version: version_label,
        lenient: options.lenient,
        dropped: DropCounts::default(),
    };
    let mut decls = Vec::new();
    for (i, n) in doc.nodes.into_iter().enumerate() {
        let at = format!("nodes[{i}]");
        if !is_valid_name(&n.name) || !is_valid_name(&n.module) {
            collector.syntax(at, "invalid procedure or module name")?;
            continue;
        }
        decls.push(Decl::Node {
            name: n.name,
            module: n.module,
            at,
        });
    }
    for (i, e) in doc.edges.into_iter().enumerate() {
        let at = format!("edges[{i}]");
        if !is_valid_name(&e.caller) || !is_valid_name(&e.callee) {
            collector.syntax(at, "invalid procedure name")?;
            continue;
        }
        decls.push(Decl::Edge {
            caller: e.caller,
            callee: e.callee,
            at,
        });
    }
    collector.assemble(decls)
}

pub fn to_json(cg: &CallGraph) -> String {
    let mut edges: Vec<JsonEdge> = cg
        .call_pairs()
        .map(|p| JsonEdge {
            caller: p.caller.to_string(),
            callee: p.callee.to_string(),
        })
        .collect();
    edges.extend(cg.self_loops().map(|p| JsonEdge {
        caller: p.to_string(),
        callee: p.to_string(),
    }));
    let doc = JsonGraph {
        version: Some(cg.version_label().to_string()),
        nodes: cg
            .procedures()
            .iter()
            .map(|p| JsonNode {
                name: p.name.clone(),
                module: p.module.clone(),
            })
            .collect(),
        edges,
    };
    serde_json::to_string_pretty(&doc).expect("graph serializes")
}

#[derive(Debug, Clone, PartialEq)]
enum DotToken {
    Id(String),
    Arrow,
    Sym(char),
}

fn dot_tokens(text: &str) -> Result<Vec<(DotToken, usize)>, (usize, String)> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut line = 1;
    let mut line_start = true;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '\n' => {
                line += 1;
                line_start = true;
                i += 1;
                continue;
            }
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '#' if line_start => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            '/' if chars.get(i + 1) == Some(&'/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            '/' if chars.get(i + 1) == Some(&'*') => {
                i += 2;
                while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                    if chars[i] == '\n' {
                        line += 1;
                    }
                    i += 1;
                }
                if i >= chars.len() {
                    return Err((line, "unterminated block comment".into()));
                }
                i += 2;
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                tokens.push((DotToken::Arrow, line));
                i += 2;
            }
            '-' if chars.get(i + 1) == Some(&'-') => {
                return Err((line, "undirected edges are not supported".into()));
            }
            '{' | '}' | '[' | ']' | '=' | ';' | ',' => {
                tokens.push((DotToken::Sym(c), line));
                i += 1;
            }
            '"' => {
                let start_line = line;
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err((start_line, "unterminated string".into())),
                        Some('"') => break,
                        Some('\\') if chars.get(i + 1) == Some(&'"') => {
                            s.push('"');
                            i += 2;
                        }
                        Some(&ch) => {
                            if ch == '\n' {
                                line += 1;
                            }
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                i += 1;
                tokens.push((DotToken::Id(s), start_line));
            }
            c if c.is_alphanumeric() || "_.$:<>".contains(c) => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_alphanumeric() || "_.$:<>".contains(chars[i]))
                    && !(chars[i] == '-' && chars.get(i + 1) == Some(&'>'))
                {
                    i += 1;
                }
                tokens.push((DotToken::Id(chars[start..i].iter().collect()), line));
            }
            other => return Err((line, format!("unexpected character `{other}`"))),
        }
        line_start = false;
    }
    Ok(tokens)
}

/// Parse the supported DOT subset: a single `digraph`, node statements with a
/// `module` attribute, and `->` edge chains. Subgraphs are rejected.
pub fn parse_dot(text: &str, version_label: &str, options: ParseOptions) -> Result<ParsedGraph, IngestError> {
    let syntax = |line: usize, message: String| IngestError::Syntax {
        version: version_label.to_string(),
        at: format!("line {line}"),
        message,
    };
    let tokens = dot_tokens(text).map_err(|(l, m)| syntax(l, m))?;
    let mut collector = Collector {
        version: version_label,
        lenient: options.lenient,
        dropped: DropCounts::default(),
    };
    let mut pos = 0;
    let peek = |pos: usize| tokens.get(pos).map(|(t, _)| t);
    let line_at = |pos: usize| tokens.get(pos).or(tokens.last()).map_or(1, |(_, l)| *l);
    let is_id = |pos: usize, word: &str| matches!(peek(pos), Some(DotToken::Id(s)) if s.eq_ignore_ascii_case(word));

    if is_id(pos, "strict") {
        pos += 1;
    }
    if !is_id(pos, "digraph") {
        return Err(syntax(line_at(pos), "expected `digraph`".into()));
    }
    pos += 1;
    if matches!(peek(pos), Some(DotToken::Id(_))) {
        pos += 1;
    }
    if peek(pos) != Some(&DotToken::Sym('{')) {
        return Err(syntax(line_at(pos), "expected `{`".into()));
    }
    pos += 1;

    let mut decls = Vec::new();
    loop {
        let stmt_line = line_at(pos);
        match peek(pos) {
            None => return Err(syntax(stmt_line, "missing closing `}`".into())),
            Some(DotToken::Sym('}')) => {
                pos += 1;
                break;
            }
            Some(DotToken::Sym(';')) => {
                pos += 1;
                continue;
            }
            Some(DotToken::Id(_)) => {}
            Some(other) => return Err(syntax(stmt_line, format!("unexpected {other:?}"))),
        }
        let Some(DotToken::Id(first)) = peek(pos).cloned() else {
            unreachable!()
        };
        pos += 1;
        let keyword = ["graph", "node", "edge", "subgraph"]
            .iter()
            .find(|k| first.eq_ignore_ascii_case(k));
        if keyword == Some(&"subgraph") {
            return Err(syntax(stmt_line, "subgraphs are not supported".into()));
        }

        // ID '=' ID at statement level is a graph attribute.
        if peek(pos) == Some(&DotToken::Sym('=')) {
            pos += 1;
            if !matches!(peek(pos), Some(DotToken::Id(_))) {
                return Err(syntax(stmt_line, "expected attribute value".into()));
            }
            pos += 1;
            continue;
        }

        let mut chain = vec![first];
        while peek(pos) == Some(&DotToken::Arrow) {
            pos += 1;
            match peek(pos) {
                Some(DotToken::Id(s)) => chain.push(s.clone()),
                _ => return Err(syntax(line_at(pos), "expected node id after `->`".into())),
            }
            pos += 1;
        }

        let mut module = None;
        while peek(pos) == Some(&DotToken::Sym('[')) {
            pos += 1;
            loop {
                match peek(pos) {
                    Some(DotToken::Sym(']')) => {
                        pos += 1;
                        break;
                    }
                    Some(DotToken::Sym(',' | ';')) => pos += 1,
                    Some(DotToken::Id(key)) => {
                        let key = key.clone();
                        pos += 1;
                        if peek(pos) != Some(&DotToken::Sym('=')) {
                            return Err(syntax(line_at(pos), format!("expected `=` after `{key}`")));
                        }
                        pos += 1;
                        let Some(DotToken::Id(value)) = peek(pos).cloned() else {
                            return Err(syntax(line_at(pos), "expected attribute value".into()));
                        };
                        pos += 1;
                        if key == "module" {
                            module = Some(value);
                        }
                    }
                    _ => return Err(syntax(line_at(pos), "malformed attribute list".into())),
                }
            }
        }

        let at = format!("line {stmt_line}");
        if keyword.is_some() && chain.len() == 1 {
            continue;
        }
        if let Some(bad) = chain.iter().find(|n| !is_valid_name(n)) {
            collector.syntax(at, format!("invalid procedure name `{bad}`"))?;
            continue;
        }
        if chain.len() == 1 {
            let name = chain.pop().unwrap();
            match module {
                Some(module) if is_valid_name(&module) => decls.push(Decl::Node { name, module, at }),
                Some(module) => collector.syntax(at, format!("invalid module name `{module}`"))?,
                None => collector.syntax(at, format!("node `{name}` has no module attribute"))?,
            }
        } else {
            for w in chain.windows(2) {
                decls.push(Decl::Edge {
                    caller: w[0].clone(),
                    callee: w[1].clone(),
                    at: at.clone(),
                });
            }
        }
    }
    if pos != tokens.len() {
        return Err(syntax(line_at(pos), "trailing content after graph".into()));
    }
    collector.assemble(decls)
}

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\\\""))
}

pub fn to_dot(cg: &CallGraph) -> String {
    let mut out = format!("digraph {} {{\n", dot_quote(cg.version_label()));
    for p in cg.procedures() {
        let _ = writeln!(out, "  {} [module={}];", dot_quote(&p.name), dot_quote(&p.module));
    }
    for pair in cg.call_pairs() {
        let _ = writeln!(out, "  {} -> {};", dot_quote(pair.caller), dot_quote(pair.callee));
    }
    for p in cg.self_loops() {
        let _ = writeln!(out, "  {} -> {};", dot_quote(p), dot_quote(p));
    }
    out.push_str("}\n");
    out
}

pub fn parse_graph(
    text: &str,
    version_label: &str,
    format: GraphFormat,
    options: ParseOptions,
) -> Result<ParsedGraph, IngestError> {
    match format {
        GraphFormat::Native => parse_native(text, version_label, options),
        GraphFormat::Dot => parse_dot(text, version_label, options),
        GraphFormat::Json => parse_json(text, version_label, options),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub label: String,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<GraphFormat>,
}

/// Chronologically ordered list of version files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(rename = "system")]
    pub system_label: String,
    #[serde(rename = "versions")]
    pub entries: Vec<ManifestEntry>,
}

fn is_valid_label(s: &str) -> bool {
    is_valid_name(s) && !s.contains([',', ';'])
}

impl Manifest {
    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        let m: Manifest = serde_json::from_str(text).map_err(|e| IngestError::Manifest(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    /// Load a manifest file; relative entry paths resolve against its directory.
    pub fn from_path(path: &Path) -> Result<Self, IngestError> {
        let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut m = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for e in &mut m.entries {
            if e.path.is_relative() {
                e.path = base.join(&e.path);
            }
        }
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.entries.is_empty() {
            return Err(IngestError::Manifest("no versions listed".into()));
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !is_valid_label(&e.label) {
                return Err(IngestError::Manifest(format!(
                    "version label `{}` must be non-empty without whitespace, `#`, `,` or `;`",
                    e.label
                )));
            }
            if !seen.insert(e.label.as_str()) {
                return Err(IngestError::Manifest(format!("duplicate version label `{}`", e.label)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

#[derive(Debug, Clone)]
pub struct LoadedSeries {
    pub series: VersionSeries,
    /// Lenient-mode drop counts, one per version in series order.
    pub dropped: Vec<(String, DropCounts)>,
}

/// Parse every version listed in `manifest`, in parallel, preserving manifest order.
pub fn load_series(manifest: &Manifest, options: ParseOptions) -> Result<LoadedSeries, IngestError> {
    manifest.validate()?;
    for e in &manifest.entries {
        if !e.path.is_file() {
            return Err(IngestError::MissingFile {
                version: e.label.clone(),
                path: e.path.clone(),
            });
        }
    }
    let parsed: Vec<ParsedGraph> = manifest
        .entries
        .par_iter()
        .map(|e| {
            let text = fs::read_to_string(&e.path).map_err(|source| IngestError::Io {
                path: e.path.clone(),
                source,
            })?;
            let format = e.format.unwrap_or_else(|| GraphFormat::from_path(&e.path));
            parse_graph(&text, &e.label, format, options)
        })
        .collect::<Result<_, _>>()?;
    let dropped = parsed
        .iter()
        .map(|p| (p.graph.version_label().to_string(), p.dropped))
        .collect();
    let graphs = parsed.into_iter().map(|p| p.graph).collect();
    let series =
        VersionSeries::new(manifest.system_label.clone(), graphs).map_err(|e| IngestError::Manifest(e.to_string()))?;
    Ok(LoadedSeries { series, dropped })
}
