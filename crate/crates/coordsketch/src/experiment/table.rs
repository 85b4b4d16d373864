//! Result tables: CSV and JSON emission plus a reader that round-trips
//! everything the writer produces.

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Summary key/value pairs, emitted as `#summary key=value` lines.
    pub summary: Vec<(String, String)>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            summary: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_summary(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    pub fn summary_value(&self, key: &str) -> Option<&str> {
        self.summary
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        for (k, v) in &self.summary {
            out.push_str(&format!("#summary {k}={v}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        let header_line = lines.next().ok_or("empty csv")?;
        let mut table = Table {
            header: header_line.split(',').map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            summary: Vec::new(),
        };
        for (idx, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("#summary ") {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| format!("line {}: bad summary", idx + 2))?;
                table.summary.push((k.to_string(), v.to_string()));
                continue;
            }
            let row: Vec<String> = line.split(',').map(|s| s.to_string()).collect();
            if row.len() != table.header.len() {
                return Err(format!(
                    "line {}: {} fields, header has {}",
                    idx + 2,
                    row.len(),
                    table.header.len()
                ));
            }
            table.rows.push(row);
        }
        Ok(table)
    }

    /// JSON: an object with `rows` (array of objects) and `summary`.
    pub fn to_json(&self) -> String {
        fn quote(s: &str) -> String {
            let mut out = String::with_capacity(s.len() + 2);
            out.push('"');
            for c in s.chars() {
                match c {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
                    c => out.push(c),
                }
            }
            out.push('"');
            out
        }
        fn value(s: &str) -> String {
            // Numbers pass through bare; everything else is quoted.
            if !s.is_empty() && s.parse::<f64>().is_ok() {
                s.to_string()
            } else {
                quote(s)
            }
        }
        let mut out = String::from("{\n  \"rows\": [\n");
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str("    {");
            for (j, (k, v)) in self.header.iter().zip(row).enumerate() {
                if j > 0 {
                    out.push_str(", ");
                }
                out.push_str(&format!("{}: {}", quote(k), value(v)));
            }
            out.push('}');
            if i + 1 < self.rows.len() {
                out.push(',');
            }
            out.push('\n');
        }
        out.push_str("  ],\n  \"summary\": {");
        for (i, (k, v)) in self.summary.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(&format!("{}: {}", quote(k), value(v)));
        }
        out.push_str("}\n}\n");
        out
    }
}
