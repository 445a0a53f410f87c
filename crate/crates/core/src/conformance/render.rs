use super::{ConceptGroup, CoverageMatrix, Mark, CONCEPTS};

const SYMBOLS: [&str; 4] = ["†", "‡", "§", "¶"];

pub(super) fn symbol(i: usize) -> String {
    match SYMBOLS.get(i) {
        Some(s) => s.to_string(),
        None => format!("*{}", i + 1),
    }
}

impl CoverageMatrix {
    fn cell_text(&self, mark: &Mark, footnotes: &[(String, &str)]) -> String {
        match mark {
            Mark::Covered => "X".into(),
            Mark::Uncovered => String::new(),
            Mark::Annotated { covered, note } => {
                let sym = footnotes
                    .iter()
                    .find(|(_, n)| n == note)
                    .map(|(s, _)| s.as_str())
                    .unwrap_or("?");
                if *covered {
                    format!("X{sym}")
                } else {
                    sym.to_string()
                }
            }
        }
    }

    fn grid(&self) -> (Vec<(String, &str)>, Vec<Vec<String>>) {
        let footnotes = self.footnotes();
        let rows = (0..CONCEPTS.len())
            .map(|i| {
                self.columns
                    .iter()
                    .map(|c| self.cell_text(&c.marks[i], &footnotes))
                    .collect()
            })
            .collect();
        (footnotes, rows)
    }

    /// Canonical machine-readable form: one record per concept, then one
    /// `#` line per footnote.
    pub fn to_csv(&self) -> String {
        let (footnotes, rows) = self.grid();
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let header = ["group", "concept"]
            .into_iter()
            .chain(self.columns.iter().map(|c| c.profile.as_str()));
        w.write_record(header).expect("in-memory csv");
        for (concept, cells) in CONCEPTS.iter().zip(&rows) {
            let record = [concept.group.id(), concept.id]
                .into_iter()
                .chain(cells.iter().map(String::as_str));
            w.write_record(record).expect("in-memory csv");
        }
        let mut out = String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 cells");
        for (sym, note) in footnotes {
            out.push_str(&format!("# {sym} {note}\n"));
        }
        out
    }

    /// Aligned plain-text table with group headings and footnotes.
    pub fn to_text(&self) -> String {
        let (footnotes, rows) = self.grid();
        let width = |s: &str| s.chars().count();
        let label_w = CONCEPTS.iter().map(|c| width(c.label) + 2).max().unwrap_or(0).max(3);
        let col_w: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .map(|(j, c)| {
                rows.iter()
                    .map(|r| width(&r[j]))
                    .max()
                    .unwrap_or(0)
                    .max(width(&c.profile))
            })
            .collect();
        let line = |label: &str, cells: &[String]| {
            let mut s = format!("{label}{}", " ".repeat(label_w - width(label)));
            for (cell, w) in cells.iter().zip(&col_w) {
                s.push_str("  ");
                s.push_str(cell);
                s.push_str(&" ".repeat(w - width(cell)));
            }
            s.trim_end().to_string() + "\n"
        };
        let names: Vec<String> = self.columns.iter().map(|c| c.profile.clone()).collect();
        let mut out = line("ARM", &names);
        let mut group = None;
        for (concept, cells) in CONCEPTS.iter().zip(&rows) {
            if group != Some(concept.group) {
                group = Some(concept.group);
                out.push_str(concept.group.label());
                out.push('\n');
                if concept.group == ConceptGroup::Interface {
                    out.push_str("  Skills\n");
                }
            }
            out.push_str(&line(&format!("  {}", concept.label), cells));
        }
        if !footnotes.is_empty() {
            out.push('\n');
            for (sym, note) in footnotes {
                out.push_str(&format!("{sym} {note}\n"));
            }
        }
        out
    }
}
