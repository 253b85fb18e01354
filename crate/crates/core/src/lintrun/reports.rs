//! Parsers for Infer JSON reports and SpotBugs XML bug collections.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use log::warn;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{IssueRecord, Tool};

const INFER_TABLE: &str = include_str!("../../data/infer_types.json");
const SPOTBUGS_TABLE: &str = include_str!("../../data/spotbugs_types.json");

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("report root must be a JSON array of findings")]
    NotAnArray,
    #[error("finding #{index}: {reason}")]
    BadEntry { index: usize, reason: String },
    #[error("malformed XML at byte {position}: {reason}")]
    Xml { position: u64, reason: String },
    #[error("bug instance #{index}: {reason}")]
    BadInstance { index: usize, reason: String },
    #[error("mapping table {path}: {reason}")]
    Table { path: String, reason: String },
}

/// Tool-native bug type → issue id. Shipped as data, one file per tool.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TypeMapping {
    pub tool: Tool,
    #[serde(default)]
    pub tool_version: String,
    /// Id recorded for bug types missing from the table.
    pub unknown_id: String,
    pub types: BTreeMap<String, String>,
}

impl TypeMapping {
    pub fn builtin(tool: Tool) -> Self {
        let raw = match tool {
            Tool::Infer => INFER_TABLE,
            Tool::Spotbugs => SPOTBUGS_TABLE,
        };
        serde_json::from_str(raw).expect("shipped mapping table is valid")
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let table_err = |reason: String| ReportError::Table {
            path: path.display().to_string(),
            reason,
        };
        let raw = std::fs::read_to_string(path).map_err(|e| table_err(e.to_string()))?;
        let table: TypeMapping = serde_json::from_str(&raw).map_err(|e| table_err(e.to_string()))?;
        let prefix = table.tool.id_prefix();
        if let Some((k, v)) = table.types.iter().find(|(_, v)| !v.starts_with(prefix)) {
            return Err(table_err(format!("{k} maps to {v}, expected a {prefix}* id")));
        }
        Ok(table)
    }

    pub fn id_for(&self, bug_type: &str) -> Option<&str> {
        self.types.get(bug_type).map(String::as_str)
    }

    /// All ids the table can produce, excluding the unknown id.
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.types.values().map(String::as_str)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ParsedReport {
    pub issues: Vec<IssueRecord>,
    /// Unmapped bug types and how often each occurred.
    pub unknown_types: BTreeMap<String, usize>,
    /// Findings dropped because they carried no usable source line.
    pub dropped: usize,
}

impl ParsedReport {
    fn warn_summary(&self, tool: Tool) {
        if !self.unknown_types.is_empty() {
            let total: usize = self.unknown_types.values().sum();
            warn!(
                "{tool}: {total} finding(s) with unmapped bug types recorded as unknown: {:?}",
                self.unknown_types
            );
        }
        if self.dropped > 0 {
            warn!("{tool}: dropped {} finding(s) without a source line", self.dropped);
        }
    }

    fn push(&mut self, mapping: &TypeMapping, bug_type: &str, path: String, line: usize, message: String) {
        let type_id = match mapping.id_for(bug_type) {
            Some(id) => id.to_string(),
            None => {
                *self.unknown_types.entry(bug_type.to_string()).or_default() += 1;
                mapping.unknown_id.clone()
            }
        };
        self.issues.push(IssueRecord {
            tool: mapping.tool,
            type_id,
            path,
            line,
            message,
            project: String::new(),
        });
    }
}

/// Parses Infer's `report.json`: an array of findings carrying `bug_type`,
/// `file` and `line`.
pub fn parse_infer_report(bytes: &[u8], mapping: &TypeMapping) -> Result<ParsedReport, ReportError> {
    let root: Value = serde_json::from_slice(bytes)?;
    let entries = root.as_array().ok_or(ReportError::NotAnArray)?;
    let mut report = ParsedReport::default();
    for (index, entry) in entries.iter().enumerate() {
        let bad = |reason: &str| ReportError::BadEntry {
            index,
            reason: reason.to_string(),
        };
        let obj = entry.as_object().ok_or_else(|| bad("not an object"))?;
        let bug_type = obj
            .get("bug_type")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("missing string field `bug_type`"))?;
        let file = obj
            .get("file")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("missing string field `file`"))?;
        let line = obj
            .get("line")
            .and_then(Value::as_i64)
            .ok_or_else(|| bad("missing integer field `line`"))?;
        if line < 1 {
            report.dropped += 1;
            continue;
        }
        let message = obj
            .get("qualifier")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string();
        report.push(mapping, bug_type, file.to_string(), line as usize, message);
    }
    report.warn_summary(Tool::Infer);
    Ok(report)
}

#[derive(Default)]
struct Instance {
    bug_type: String,
    message: String,
    /// `<SourceLine>` directly under `<BugInstance>`.
    primary: Option<(String, usize)>,
    /// `<SourceLine>` under the instance's `<Method>`.
    method: Option<(String, usize)>,
}

fn attrs(e: &BytesStart<'_>, position: u64) -> Result<HashMap<String, String>, ReportError> {
    let mut out = HashMap::new();
    for attr in e.attributes() {
        let attr = attr.map_err(|err| ReportError::Xml {
            position,
            reason: err.to_string(),
        })?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr
            .unescape_value()
            .map_err(|err| ReportError::Xml {
                position,
                reason: err.to_string(),
            })?
            .into_owned();
        out.insert(key, value);
    }
    Ok(out)
}

fn source_line(a: &HashMap<String, String>) -> Option<(String, usize)> {
    let path = a.get("sourcepath")?.clone();
    let line = a.get("start")?.parse::<usize>().ok().filter(|&l| l >= 1)?;
    Some((path, line))
}

/// Parses a SpotBugs XML report. Each `<BugInstance>` contributes its own
/// `<SourceLine>`, falling back to the enclosing method's first line;
/// instances with neither are dropped and counted.
pub fn parse_spotbugs_report(bytes: &[u8], mapping: &TypeMapping) -> Result<ParsedReport, ReportError> {
    let mut reader = Reader::from_reader(bytes);
    reader.config_mut().trim_text(true);
    let mut buf = Vec::new();
    let mut report = ParsedReport::default();
    let mut current: Option<Instance> = None;
    // element names between the current BugInstance and the cursor
    let mut path: Vec<String> = Vec::new();
    let mut in_long_message = false;
    let mut index = 0usize;

    loop {
        let position = reader.buffer_position();
        let event = reader.read_event_into(&mut buf).map_err(|e| ReportError::Xml {
            position,
            reason: e.to_string(),
        })?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_empty = matches!(event, Event::Empty(_));
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                if name == "BugInstance" {
                    let a = attrs(e, position)?;
                    let bug_type = a.get("type").cloned().ok_or_else(|| ReportError::BadInstance {
                        index,
                        reason: "missing `type` attribute".to_string(),
                    })?;
                    let inst = Instance {
                        bug_type,
                        ..Default::default()
                    };
                    if is_empty {
                        report.dropped += 1;
                        index += 1;
                    } else {
                        current = Some(inst);
                        path.clear();
                    }
                } else if let Some(inst) = current.as_mut() {
                    if name == "SourceLine" {
                        let a = attrs(e, position)?;
                        let parent = path.last().map(String::as_str);
                        match parent {
                            None if inst.primary.is_none() => inst.primary = source_line(&a),
                            Some("Method") if inst.method.is_none() => inst.method = source_line(&a),
                            _ => {}
                        }
                    } else if name == "LongMessage" && path.is_empty() {
                        in_long_message = !is_empty;
                    }
                    if !is_empty {
                        path.push(name);
                    }
                }
            }
            Event::Text(t) if in_long_message => {
                if let Some(inst) = current.as_mut() {
                    inst.message = t
                        .unescape()
                        .map(|s| s.into_owned())
                        .unwrap_or_default();
                }
            }
            Event::End(e) => {
                let name = e.name();
                if name.as_ref() == b"BugInstance" {
                    if let Some(inst) = current.take() {
                        match inst.primary.or(inst.method) {
                            Some((file, line)) => report.push(mapping, &inst.bug_type, file, line, inst.message),
                            None => report.dropped += 1,
                        }
                        index += 1;
                    }
                } else if current.is_some() {
                    if name.as_ref() == b"LongMessage" {
                        in_long_message = false;
                    }
                    path.pop();
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if current.is_some() {
        return Err(ReportError::BadInstance {
            index,
            reason: "unterminated <BugInstance>".to_string(),
        });
    }
    report.warn_summary(Tool::Spotbugs);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    const INFER_FIXTURE: &str = r#"[
      {"bug_type": "NULL_DEREFERENCE", "qualifier": "object `input` could be null", "file": "src/main/java/a/Printer.java", "line": 8, "procedure": "a.Printer.printAttribute"},
      {"bug_type": "RESOURCE_LEAK", "qualifier": "resource not released", "file": "src/main/java/a/Io.java", "line": 21},
      {"bug_type": "THREAD_SAFETY_VIOLATION", "qualifier": "unprotected write", "file": "src/main/java/a/Counter.java", "line": 5}
    ]"#;

    const SPOTBUGS_FIXTURE: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<BugCollection version="4.8.3" sequence="0" timestamp="0" analysisTimestamp="0" release="">
  <Project projectName="demo"/>
  <BugInstance type="EI_EXPOSE_REP" priority="2" rank="18" abbrev="EI" category="MALICIOUS_CODE">
    <ShortMessage>May expose internal representation</ShortMessage>
    <LongMessage>a.Box.getItems() may expose internal representation &amp; state</LongMessage>
    <Class classname="a.Box"><SourceLine classname="a.Box" start="3" end="20" sourcefile="Box.java" sourcepath="a/Box.java"/></Class>
    <Method classname="a.Box" name="getItems" signature="()[I" isStatic="false">
      <SourceLine classname="a.Box" start="10" end="12" startBytecode="0" endBytecode="4" sourcefile="Box.java" sourcepath="a/Box.java"/>
    </Method>
    <SourceLine classname="a.Box" start="11" end="11" startBytecode="1" endBytecode="1" sourcefile="Box.java" sourcepath="a/Box.java"/>
  </BugInstance>
  <BugInstance type="OS_OPEN_STREAM" priority="1" category="BAD_PRACTICE">
    <Class classname="a.Io"><SourceLine classname="a.Io" sourcefile="Io.java" sourcepath="a/Io.java"/></Class>
    <Method classname="a.Io" name="read" signature="()V">
      <SourceLine classname="a.Io" start="30" end="40" sourcefile="Io.java" sourcepath="a/Io.java"/>
    </Method>
  </BugInstance>
</BugCollection>"#;

    fn infer() -> TypeMapping {
        TypeMapping::builtin(Tool::Infer)
    }

    fn spotbugs() -> TypeMapping {
        TypeMapping::builtin(Tool::Spotbugs)
    }

    #[test]
    fn builtin_tables() {
        let i = infer();
        assert_eq!(i.types.len(), 10);
        assert!(i.ids().all(|id| id.starts_with('I')));
        let s = spotbugs();
        assert_eq!(s.types.len(), 108);
        assert!(s.ids().all(|id| id.starts_with('S')));
        assert_eq!(s.id_for("EI_EXPOSE_REP"), Some("S8"));
        assert_eq!(i.id_for("NULL_DEREFERENCE"), Some("I1"));
        let distinct: std::collections::BTreeSet<_> = s.ids().collect();
        assert_eq!(distinct.len(), 108);
    }

    #[test]
    fn infer_three_findings() {
        let r = parse_infer_report(INFER_FIXTURE.as_bytes(), &infer()).unwrap();
        let got: Vec<_> = r
            .issues
            .iter()
            .map(|i| (i.type_id.as_str(), i.path.as_str(), i.line))
            .collect();
        assert_eq!(
            got,
            vec![
                ("I1", "src/main/java/a/Printer.java", 8),
                ("I3", "src/main/java/a/Io.java", 21),
                ("I5", "src/main/java/a/Counter.java", 5),
            ]
        );
        assert!(r.issues.iter().all(|i| i.tool == Tool::Infer));
        assert!(r.unknown_types.is_empty());
    }

    #[test]
    fn infer_empty_and_unknown() {
        assert!(parse_infer_report(b"[]", &infer()).unwrap().issues.is_empty());
        let r = parse_infer_report(
            br#"[{"bug_type":"SOMETHING_NEW","file":"A.java","line":3}]"#,
            &infer(),
        )
        .unwrap();
        assert_eq!(r.issues[0].type_id, "I?");
        assert_eq!(r.unknown_types.get("SOMETHING_NEW"), Some(&1));
    }

    #[test]
    fn infer_malformed_names_entry() {
        let err = parse_infer_report(
            br#"[{"bug_type":"NULL_DEREFERENCE","file":"A.java","line":3},{"file":"B.java","line":1}]"#,
            &infer(),
        )
        .unwrap_err();
        assert!(matches!(err, ReportError::BadEntry { index: 1, .. }), "{err}");
        assert!(matches!(parse_infer_report(b"{}", &infer()), Err(ReportError::NotAnArray)));
        assert!(matches!(parse_infer_report(b"[", &infer()), Err(ReportError::Json(_))));
    }

    #[test]
    fn spotbugs_two_instances() {
        let r = parse_spotbugs_report(SPOTBUGS_FIXTURE.as_bytes(), &spotbugs()).unwrap();
        assert_eq!(r.issues.len(), 2);
        assert_eq!((r.issues[0].type_id.as_str(), r.issues[0].line), ("S8", 11));
        assert_eq!(r.issues[0].path, "a/Box.java");
        assert!(r.issues[0].message.contains("internal representation & state"));
        // no primary source line: falls back to the method's first line
        assert_eq!((r.issues[1].type_id.as_str(), r.issues[1].line), ("S6", 30));
        assert_eq!(r.dropped, 0);
    }

    #[test]
    fn spotbugs_empty_and_unlocated() {
        let empty = r#"<?xml version="1.0"?><BugCollection version="4.8.3"><Project/></BugCollection>"#;
        assert!(parse_spotbugs_report(empty.as_bytes(), &spotbugs()).unwrap().issues.is_empty());
        let unlocated = r#"<BugCollection>
          <BugInstance type="SE_BAD_FIELD"><Class classname="a.B"><SourceLine classname="a.B" sourcepath="a/B.java"/></Class></BugInstance>
          <BugInstance type="MADE_UP_TYPE"><SourceLine sourcepath="a/B.java" start="4" end="4"/></BugInstance>
        </BugCollection>"#;
        let r = parse_spotbugs_report(unlocated.as_bytes(), &spotbugs()).unwrap();
        assert_eq!(r.dropped, 1);
        assert_eq!(r.issues.len(), 1);
        assert_eq!(r.issues[0].type_id, "S?");
    }

    #[test]
    fn spotbugs_malformed() {
        assert!(parse_spotbugs_report(b"<BugCollection><BugInstance type=\"X\">", &spotbugs()).is_err());
        assert!(matches!(
            parse_spotbugs_report(b"<BugCollection><BugInstance></BugInstance></BugCollection>", &spotbugs()),
            Err(ReportError::BadInstance { index: 0, .. })
        ));
    }

    #[test]
    fn table_prefix_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.json");
        std::fs::write(&p, r#"{"tool":"INFER","unknown_id":"I?","types":{"X":"S1"}}"#).unwrap();
        assert!(matches!(TypeMapping::load(&p), Err(ReportError::Table { .. })));
    }
}
