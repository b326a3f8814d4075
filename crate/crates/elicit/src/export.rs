//! Export serialization. The CLI and the HTTP API both call [`render`], so
//! the same state always yields the same bytes.

use elicit_core::SessionState;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    /// `doc_id` then one column per variable in schema order.
    #[default]
    Csv,
    /// One object per document: `{"doc_id": .., "<variable>": ..}`.
    Jsonl,
    /// One provenance row per cell.
    Provenance,
}

impl ExportFormat {
    pub fn content_type(self) -> &'static str {
        match self {
            ExportFormat::Csv => "text/csv; charset=utf-8",
            ExportFormat::Jsonl | ExportFormat::Provenance => "application/x-ndjson",
        }
    }
}

pub fn render(state: &SessionState, format: ExportFormat) -> Vec<u8> {
    match format {
        ExportFormat::Csv => {
            let table = state.export_table();
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            w.write_record(&table.header).expect("in-memory write");
            for row in &table.rows {
                w.write_record(row).expect("in-memory write");
            }
            w.into_inner().expect("in-memory flush")
        }
        ExportFormat::Jsonl => {
            let table = state.export_table();
            let mut out = Vec::new();
            for row in &table.rows {
                out.push(b'{');
                for (i, (k, v)) in table.header.iter().zip(row).enumerate() {
                    if i > 0 {
                        out.push(b',');
                    }
                    serde_json::to_writer(&mut out, k).expect("in-memory write");
                    out.push(b':');
                    serde_json::to_writer(&mut out, v).expect("in-memory write");
                }
                out.extend_from_slice(b"}\n");
            }
            out
        }
        ExportFormat::Provenance => crate::store::to_jsonl(&state.provenance()).into_bytes(),
    }
}
