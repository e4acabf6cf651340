//! Tab-separated tables with a header row.

/// Shortest round-trip scientific notation, so reruns are byte-identical.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), num)
}

#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width does not match header");
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join("\t");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join("\t"));
            out.push('\n');
        }
        out
    }
}

/// Two-column `key value` table.
#[derive(Debug, Clone, Default)]
pub struct Summary {
    rows: Vec<(String, String)>,
}

impl Summary {
    pub fn put(&mut self, key: &str, value: impl ToString) {
        self.rows.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut t = Table::new(&["key", "value"]);
        for (k, v) in &self.rows {
            t.push(vec![k.clone(), v.clone()]);
        }
        t.render()
    }
}
