//! Canonical JSON form of an SSG and the Graphviz rendering.
//!
//! The JSON layout is stable: node ids dense from 0, control nodes first in
//! offset order, attrs as sorted hex-string maps, edges sorted
//! lexicographically. Identical graphs serialize to identical bytes.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cfg::FunctionId;
use crate::opcode::StableCategory;
use crate::ssg::{
    CallRole, ControlNode, DataNode, DataNodeKind, Edge, Relation, SinkKind, Site, SourceKind, Ssg,
};
use crate::word::Word;

#[derive(Debug, Serialize, Deserialize)]
struct SsgJson {
    selector: String,
    nodes: Vec<NodeJson>,
    edges: Vec<EdgeJson>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeJson {
    id: usize,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    category: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    opcode: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    data_kind: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    attrs: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeJson {
    from: usize,
    to: usize,
    rel: String,
}

#[derive(Debug)]
pub enum SsgJsonError {
    Parse(String),
    Schema(String),
}

impl fmt::Display for SsgJsonError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SsgJsonError::Parse(e) => write!(f, "ssg json parse error: {e}"),
            SsgJsonError::Schema(e) => write!(f, "ssg json schema error: {e}"),
        }
    }
}

impl std::error::Error for SsgJsonError {}

fn hex_u64(v: u64) -> String {
    format!("{v:#x}")
}

fn opt_word(w: &Option<Word>) -> String {
    match w {
        Some(w) => w.to_hex(),
        None => "unknown".to_string(),
    }
}

fn parse_opt_word(s: &str) -> Result<Option<Word>, SsgJsonError> {
    if s == "unknown" {
        return Ok(None);
    }
    Word::from_hex(s)
        .map(Some)
        .ok_or_else(|| SsgJsonError::Schema(format!("bad word: {s}")))
}

fn parse_hex_usize(s: &str) -> Result<usize, SsgJsonError> {
    let t = s.strip_prefix("0x").unwrap_or(s);
    usize::from_str_radix(t, 16).map_err(|e| SsgJsonError::Schema(format!("bad hex {s}: {e}")))
}

impl Ssg {
    pub fn to_json(&self) -> String {
        let nodes_control = self.control_nodes.iter().map(|c| NodeJson {
            id: c.id,
            kind: "control".to_string(),
            category: Some(c.category.as_str().to_string()),
            opcode: Some(c.opcode),
            data_kind: None,
            attrs: [
                ("block".to_string(), hex_u64(c.site.block as u64)),
                ("site".to_string(), hex_u64(c.site.offset as u64)),
            ]
            .into_iter()
            .collect(),
        });
        let nodes_data = self.data_nodes.iter().map(|d| {
            let (data_kind, opcode, attrs) = data_node_fields(&d.kind);
            NodeJson {
                id: d.id,
                kind: "data".to_string(),
                category: None,
                opcode,
                data_kind: Some(data_kind),
                attrs,
            }
        });
        let doc = SsgJson {
            selector: self.function.to_string(),
            nodes: nodes_control.chain(nodes_data).collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeJson { from: e.from, to: e.to, rel: e.rel.as_str().to_string() })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("ssg json serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Ssg, SsgJsonError> {
        let doc: SsgJson =
            serde_json::from_str(text).map_err(|e| SsgJsonError::Parse(e.to_string()))?;
        let function = FunctionId::parse(&doc.selector)
            .ok_or_else(|| SsgJsonError::Schema(format!("bad selector {}", doc.selector)))?;

        let mut edges = Vec::with_capacity(doc.edges.len());
        for e in &doc.edges {
            let rel = match e.rel.as_str() {
                "cc" => Relation::Cc,
                "dd" => Relation::Dd,
                "cd" => Relation::Cd,
                other => return Err(SsgJsonError::Schema(format!("bad relation {other}"))),
            };
            edges.push(Edge { from: e.from, to: e.to, rel });
        }

        // sinks learn their owning control node from the CD edges
        let mut sink_owner: BTreeMap<usize, usize> = BTreeMap::new();
        for e in &edges {
            if e.rel == Relation::Cd {
                sink_owner.insert(e.to, e.from);
            }
        }

        let mut control_nodes = Vec::new();
        let mut data_nodes = Vec::new();
        for node in &doc.nodes {
            match node.kind.as_str() {
                "control" => {
                    let category = match node.category.as_deref() {
                        Some("storage") => StableCategory::Storage,
                        Some("log") => StableCategory::Log,
                        Some("call") => StableCategory::Call,
                        Some("return") => StableCategory::Return,
                        other => {
                            return Err(SsgJsonError::Schema(format!("bad category {other:?}")))
                        }
                    };
                    let opcode = node
                        .opcode
                        .ok_or_else(|| SsgJsonError::Schema("control node without opcode".into()))?;
                    let offset = node
                        .attrs
                        .get("site")
                        .map(|s| parse_hex_usize(s))
                        .transpose()?
                        .unwrap_or(0);
                    let block = node
                        .attrs
                        .get("block")
                        .map(|s| parse_hex_usize(s))
                        .transpose()?
                        .unwrap_or(0);
                    control_nodes.push(ControlNode {
                        id: node.id,
                        category,
                        opcode,
                        site: Site { block, offset },
                    });
                }
                "data" => {
                    let kind = parse_data_node(node, sink_owner.get(&node.id).copied())?;
                    data_nodes.push(DataNode { id: node.id, kind });
                }
                other => return Err(SsgJsonError::Schema(format!("bad node kind {other}"))),
            }
        }

        let ssg = Ssg {
            function,
            control_nodes,
            data_nodes,
            edges,
            taint_truncated: false,
        };
        for (i, c) in ssg.control_nodes.iter().enumerate() {
            if c.id != i {
                return Err(SsgJsonError::Schema(
                    "node ids must be dense with control nodes first".into(),
                ));
            }
        }
        for (i, d) in ssg.data_nodes.iter().enumerate() {
            if d.id != ssg.control_nodes.len() + i {
                return Err(SsgJsonError::Schema(
                    "node ids must be dense with control nodes first".into(),
                ));
            }
        }
        let total = ssg.node_count();
        if ssg.edges.iter().any(|e| e.from >= total || e.to >= total) {
            return Err(SsgJsonError::Schema("edge endpoint out of range".into()));
        }
        Ok(ssg)
    }

    /// Graphviz rendering: control nodes as boxes, data nodes as ellipses,
    /// the relation as the edge label.
    pub fn to_dot(&self) -> String {
        let mut out =
            String::from("digraph ssg {\n  rankdir=TB;\n  node [fontname=\"monospace\"];\n");
        for c in &self.control_nodes {
            out.push_str(&format!(
                "  n{} [shape=box, label=\"{}@{:#x}\"];\n",
                c.id,
                crate::opcode::name(c.opcode),
                c.site.offset
            ));
        }
        for d in &self.data_nodes {
            let (kind, opcode, attrs) = data_node_fields(&d.kind);
            let mut label = kind;
            if let Some(op) = opcode {
                label.push(' ');
                label.push_str(crate::opcode::name(op));
            }
            for (k, v) in &attrs {
                label.push_str(&format!("\\n{k}={v}"));
            }
            out.push_str(&format!("  n{} [shape=ellipse, label=\"{label}\"];\n", d.id));
        }
        for e in &self.edges {
            out.push_str(&format!("  n{} -> n{} [label=\"{}\"];\n", e.from, e.to, e.rel.as_str()));
        }
        out.push_str("}\n");
        out
    }
}

fn data_node_fields(kind: &DataNodeKind) -> (String, Option<u8>, BTreeMap<String, String>) {
    let mut attrs = BTreeMap::new();
    match kind {
        DataNodeKind::Source(source) => match source {
            SourceKind::Constant { value } => {
                attrs.insert("value".into(), value.to_hex());
                ("constant".into(), None, attrs)
            }
            SourceKind::Information { opcode } => ("information".into(), Some(*opcode), attrs),
            SourceKind::Calldata { offset } => {
                attrs.insert("offset".into(), opt_word(offset));
                ("calldata".into(), None, attrs)
            }
            SourceKind::ReturnData { offset, site } => {
                attrs.insert("offset".into(), opt_word(offset));
                attrs.insert("site".into(), hex_u64(*site as u64));
                ("returndata".into(), None, attrs)
            }
            SourceKind::Definition { opcode, site } => {
                if let Some(site) = site {
                    attrs.insert("site".into(), hex_u64(*site as u64));
                }
                ("definition".into(), *opcode, attrs)
            }
        },
        DataNodeKind::Sink { kind, .. } => match kind {
            SinkKind::LogTopic { topic_index } => {
                attrs.insert("topic_index".into(), hex_u64(*topic_index as u64));
                ("log".into(), None, attrs)
            }
            SinkKind::LogData { index } => {
                attrs.insert("index".into(), hex_u64(*index as u64));
                ("log".into(), None, attrs)
            }
            SinkKind::StorageSlot { slot } => {
                attrs.insert("role".into(), "slot".into());
                attrs.insert("slot".into(), opt_word(slot));
                ("storage".into(), None, attrs)
            }
            SinkKind::StorageValue { slot } => {
                attrs.insert("role".into(), "stored_value".into());
                attrs.insert("slot".into(), opt_word(slot));
                ("storage".into(), None, attrs)
            }
            SinkKind::Call { role, index } => {
                attrs.insert("role".into(), role.as_str().into());
                attrs.insert("index".into(), hex_u64(*index as u64));
                ("call".into(), None, attrs)
            }
            SinkKind::Return { index } => {
                attrs.insert("index".into(), hex_u64(*index as u64));
                ("return".into(), None, attrs)
            }
        },
    }
}

fn parse_data_node(node: &NodeJson, owner: Option<usize>) -> Result<DataNodeKind, SsgJsonError> {
    let kind_str = node
        .data_kind
        .as_deref()
        .ok_or_else(|| SsgJsonError::Schema("data node without data_kind".into()))?;
    let attr = |name: &str| -> Result<&str, SsgJsonError> {
        node.attrs
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| SsgJsonError::Schema(format!("{kind_str} node missing attr {name}")))
    };
    let source = |s: SourceKind| Ok(DataNodeKind::Source(s));
    let sink = |k: SinkKind| {
        let control =
            owner.ok_or_else(|| SsgJsonError::Schema(format!("sink {} has no cd edge", node.id)))?;
        Ok(DataNodeKind::Sink { control, kind: k })
    };
    match kind_str {
        "constant" => source(SourceKind::Constant {
            value: parse_opt_word(attr("value")?)?
                .ok_or_else(|| SsgJsonError::Schema("constant with unknown value".into()))?,
        }),
        "information" => source(SourceKind::Information {
            opcode: node
                .opcode
                .ok_or_else(|| SsgJsonError::Schema("information node without opcode".into()))?,
        }),
        "calldata" => source(SourceKind::Calldata { offset: parse_opt_word(attr("offset")?)? }),
        "returndata" => source(SourceKind::ReturnData {
            offset: parse_opt_word(attr("offset")?)?,
            site: parse_hex_usize(attr("site")?)?,
        }),
        "definition" => source(SourceKind::Definition {
            opcode: node.opcode,
            site: node.attrs.get("site").map(|s| parse_hex_usize(s)).transpose()?,
        }),
        "log" => {
            if let Some(t) = node.attrs.get("topic_index") {
                sink(SinkKind::LogTopic { topic_index: parse_hex_usize(t)? as u32 })
            } else {
                sink(SinkKind::LogData { index: parse_hex_usize(attr("index")?)? as u32 })
            }
        }
        "storage" => {
            let slot = parse_opt_word(attr("slot")?)?;
            match attr("role")? {
                "slot" => sink(SinkKind::StorageSlot { slot }),
                "stored_value" => sink(SinkKind::StorageValue { slot }),
                other => Err(SsgJsonError::Schema(format!("bad storage role {other}"))),
            }
        }
        "call" => {
            let role = match attr("role")? {
                "address" => CallRole::Address,
                "value" => CallRole::Value,
                "selector" => CallRole::Selector,
                "arg" => CallRole::Arg,
                other => return Err(SsgJsonError::Schema(format!("bad call role {other}"))),
            };
            sink(SinkKind::Call { role, index: parse_hex_usize(attr("index")?)? as u32 })
        }
        "return" => sink(SinkKind::Return { index: parse_hex_usize(attr("index")?)? as u32 }),
        other => Err(SsgJsonError::Schema(format!("bad data_kind {other}"))),
    }
}
