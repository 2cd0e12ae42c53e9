use std::fmt::{self, Write as _};
use std::str::FromStr;

use super::published::{published, MetricTriple, PublishedRow};
use super::{AggregateReport, Stat};
use crate::archzoo::ArchName;
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::structure::Structure;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    /// One row per architecture.
    ArchTable,
    /// One row per training loss.
    LossTable,
    /// Per-structure comparison with published methods.
    SotaTable,
}

impl Layout {
    pub const ALL: [Layout; 3] = [Layout::ArchTable, Layout::LossTable, Layout::SotaTable];

    pub fn key(self) -> &'static str {
        match self {
            Layout::ArchTable => "arch_table",
            Layout::LossTable => "loss_table",
            Layout::SotaTable => "sota_table",
        }
    }

    fn expected_keys(self) -> Vec<&'static str> {
        match self {
            Layout::ArchTable => [ArchName::Fcn8s, ArchName::UnetVgg16, ArchName::FcDensenet, ArchName::DrnC26]
                .iter()
                .map(|a| a.key())
                .collect(),
            Layout::LossTable => [LossKind::Dsc, LossKind::Jsc, LossKind::Tversky, LossKind::Bce]
                .iter()
                .map(|l| l.name())
                .collect(),
            Layout::SotaTable => Vec::new(),
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Layout::ALL
            .into_iter()
            .find(|l| l.key() == s)
            .ok_or_else(|| Error::Config(format!("unknown report layout `{s}`")))
    }
}

/// One evaluated run to place in a table.
#[derive(Clone, Debug)]
pub struct ReportRow {
    /// Architecture key for `arch_table`, loss name for `loss_table`.
    pub key: String,
    pub label: String,
    pub fine_tuned: Option<bool>,
    pub report: AggregateReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub layout: Layout,
    pub markdown: String,
    pub csv: String,
    /// Rows or cells the layout calls for that were not supplied.
    pub warnings: Vec<String>,
}

fn f3(v: f64) -> String {
    format!("{v:.3}")
}

fn pm(s: Option<Stat>) -> String {
    s.map(|s| format!("{:.3}±{:.3}", s.mean, s.std)).unwrap_or_else(|| "-".into())
}

fn triple(report: &AggregateReport, s: Structure) -> Option<[Option<f64>; 3]> {
    report
        .structures
        .get(&s)
        .map(|st| [Some(st.dice.mean), Some(st.jaccard.mean), st.macd_mm.map(|m| m.mean)])
}

fn cell(v: Option<f64>) -> String {
    v.map(f3).unwrap_or_else(|| "-".into())
}

fn metric_header(md: &mut String, csv: &mut String, first: &[&str]) {
    let mut cols: Vec<String> = first.iter().map(|s| s.to_string()).collect();
    let mut csv_cols: Vec<String> = first.iter().map(|s| s.to_ascii_lowercase()).collect();
    for s in Structure::ALL {
        for m in ["D", "J", "MACD"] {
            cols.push(format!("{} {m}", s.title()));
        }
        for m in ["dice", "jaccard", "macd_mm"] {
            csv_cols.push(format!("{s}_{m}"));
        }
    }
    let _ = writeln!(md, "| {} |", cols.join(" | "));
    let _ = writeln!(md, "|{}", "---|".repeat(cols.len()));
    let _ = writeln!(csv, "{}", csv_cols.join(","));
}

fn published_block(md: &mut String, title: &str, rows: &[PublishedRow], with_ft: bool) {
    let _ = writeln!(md, "\n### Published reference\n");
    let mut ignored = String::new();
    let first: &[&str] = if with_ft { &[title, "FT"] } else { &[title] };
    metric_header(md, &mut ignored, first);
    for r in rows {
        let mut cells = vec![r.label.clone()];
        if with_ft {
            cells.push(ft_mark(r.fine_tuned));
        }
        for s in Structure::ALL {
            let t: MetricTriple = r.get(s);
            cells.extend(t.iter().map(|&v| f3(v)));
        }
        let _ = writeln!(md, "| {} |", cells.join(" | "));
    }
}

fn ft_mark(ft: Option<bool>) -> String {
    match ft {
        Some(true) => "yes".into(),
        Some(false) => "no".into(),
        None => "-".into(),
    }
}

fn metric_table(rows: &[ReportRow], layout: Layout, warnings: &mut Vec<String>) -> (String, String) {
    let with_ft = layout == Layout::ArchTable;
    let title = if with_ft { "Architecture" } else { "Loss" };
    let mut md = format!(
        "## {}\n\n",
        if with_ft {
            "Architecture comparison (multi-class Dice loss)"
        } else {
            "Loss function comparison (U-Net (VGG16), multi-class)"
        }
    );
    let mut csv = String::new();
    let first: &[&str] = if with_ft { &[title, "FT"] } else { &[title] };
    metric_header(&mut md, &mut csv, first);
    for row in rows {
        let mut cells = vec![row.label.clone()];
        let mut csv_cells = vec![row.key.clone()];
        if with_ft {
            cells.push(ft_mark(row.fine_tuned));
            csv_cells.push(row.fine_tuned.map(|b| b.to_string()).unwrap_or_default());
        }
        for s in Structure::ALL {
            match triple(&row.report, s) {
                Some(t) => {
                    cells.extend(t.iter().map(|v| cell(*v)));
                    csv_cells.extend(t.iter().map(|v| v.map(|x| format!("{x:.6}")).unwrap_or_default()));
                }
                None => {
                    warnings.push(format!("partial report: row `{}` has no {s} results", row.key));
                    cells.extend(std::iter::repeat("-".to_string()).take(3));
                    csv_cells.extend(std::iter::repeat(String::new()).take(3));
                }
            }
        }
        let _ = writeln!(md, "| {} |", cells.join(" | "));
        let _ = writeln!(csv, "{}", csv_cells.join(","));
    }
    let reference = if with_ft { &published().arch } else { &published().loss };
    published_block(&mut md, title, reference, with_ft);
    (md, csv)
}

fn sota_table(rows: &[ReportRow], warnings: &mut Vec<String>) -> (String, String) {
    let mut md = String::from("## Comparison with published methods\n");
    let mut csv = String::from(
        "structure,method,dice_mean,dice_std,jaccard_mean,jaccard_std,macd_mm_mean,macd_mm_std,source\n",
    );
    let list = |v: &[f64]| -> (String, String, String) {
        match v {
            [m] => (f3(*m), f3(*m), String::new()),
            [m, s] => (format!("{m:.3}±{s:.3}"), f3(*m), f3(*s)),
            _ => ("-".into(), String::new(), String::new()),
        }
    };
    for s in Structure::ALL {
        let _ = writeln!(md, "\n### {}\n", s.title());
        let _ = writeln!(md, "| Method | Dice | Jaccard | MACD (mm) | Source |");
        let _ = writeln!(md, "|---|---|---|---|---|");
        for p in published().sota.iter().filter(|p| p.structure == s) {
            let (d, dm, ds) = list(&p.dice);
            let (j, jm, js) = list(&p.jaccard);
            let (m, mm, ms) = list(&p.macd_mm);
            let _ = writeln!(md, "| {} | {d} | {j} | {m} | {} |", p.method, p.source);
            let _ = writeln!(csv, "{s},{},{dm},{ds},{jm},{js},{mm},{ms},{}", p.method, p.source);
        }
        for row in rows {
            let Some(st) = row.report.structures.get(&s) else {
                warnings.push(format!("partial report: row `{}` has no {s} results", row.key));
                continue;
            };
            let _ = writeln!(
                md,
                "| {} (this run) | {} | {} | {} | n={} |",
                row.label,
                pm(Some(st.dice)),
                pm(Some(st.jaccard)),
                pm(st.macd_mm),
                st.n_cases
            );
            let macd = st
                .macd_mm
                .map(|m| format!("{:.6},{:.6}", m.mean, m.std))
                .unwrap_or_else(|| ",".into());
            let _ = writeln!(
                csv,
                "{s},{} (this run),{:.6},{:.6},{:.6},{:.6},{macd},this run",
                row.label, st.dice.mean, st.dice.std, st.jaccard.mean, st.jaccard.std
            );
        }
    }
    (md, csv)
}

/// Render `rows` in `layout` as markdown and CSV, next to the published
/// reference values.
pub fn emit_report(rows: &[ReportRow], layout: Layout) -> Report {
    let mut warnings = Vec::new();
    if rows.is_empty() {
        warnings.push("partial report: no evaluated rows".to_string());
    }
    for key in layout.expected_keys() {
        if !rows.iter().any(|r| r.key == key) {
            warnings.push(format!("partial report: no row for `{key}`"));
        }
    }
    let (markdown, csv) = match layout {
        Layout::ArchTable | Layout::LossTable => metric_table(rows, layout, &mut warnings),
        Layout::SotaTable => sota_table(rows, &mut warnings),
    };
    for w in &warnings {
        log::warn!("{layout}: {w}");
    }
    Report {
        layout,
        markdown,
        csv,
        warnings,
    }
}
