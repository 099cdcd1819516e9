//! JSONL event trace. One record per device command or paced dummy burst,
//! written in completion order so equal-seed runs are byte-identical.

use std::io::Write;

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Write,
    Append,
    Read,
    Finish,
    Reset,
    Alloc,
    Erase,
    Dummy,
    OutOfSpace,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord {
    /// Submission time, microseconds.
    pub t: u64,
    pub kind: TraceKind,
    pub job: usize,
    pub zone: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lba: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pages: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elements: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub done: Option<u64>,
}

pub struct TraceWriter<W: Write> {
    out: W,
    records: u64,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        TraceWriter { out, records: 0 }
    }

    pub fn record(&mut self, rec: &TraceRecord) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, rec)?;
        self.out.write_all(b"\n")?;
        self.records += 1;
        Ok(())
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.out.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_are_one_json_object_per_line() {
        let mut w = TraceWriter::new(Vec::new());
        w.record(&TraceRecord {
            t: 0,
            kind: TraceKind::Write,
            job: 0,
            zone: 3,
            lba: Some(0),
            pages: Some(8),
            elements: None,
            done: Some(700),
        })
        .unwrap();
        w.record(&TraceRecord {
            t: 700,
            kind: TraceKind::Finish,
            job: 0,
            zone: 3,
            lba: None,
            pages: None,
            elements: None,
            done: None,
        })
        .unwrap();
        assert_eq!(w.records(), 2);
        let text = String::from_utf8(w.out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        for line in lines {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v.get("kind").is_some());
        }
        assert!(!text.contains("lba\":null"));
    }
}
