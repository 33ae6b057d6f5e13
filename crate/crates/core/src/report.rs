//! Verdict grids, rationality checks, summaries and rendered documents.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::criticality::{CaseKey, CriticalValues, TestCase, VistaKind};
use crate::oracle::{Verdict, VerdictRecord};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ReportError {
    #[error("grid incomplete, missing {} case(s): {}", .0.len(), describe_keys(.0))]
    Incomplete(Vec<CaseKey>),
    #[error("duplicate record for case {0:?}")]
    Duplicate(CaseKey),
    #[error("records mix contexts or speeds: {0}")]
    Mixed(String),
    #[error("no records")]
    Empty,
    #[error("unsupported format '{0}', expected csv, json or svg")]
    UnsupportedFormat(String),
}

fn describe_keys(keys: &[CaseKey]) -> String {
    let shown: Vec<String> = keys
        .iter()
        .take(8)
        .map(|k| match k.x_a_mm {
            Some(a) => format!("(x_a={}, x_f={})", a as f64 / 1000.0, k.x_f_mm as f64 / 1000.0),
            None => format!("(x_f={})", k.x_f_mm as f64 / 1000.0),
        })
        .collect();
    let mut s = shown.join(", ");
    if keys.len() > 8 {
        s.push_str(", ...");
    }
    s
}

/// Macroscopic verdict categories used for colouring and totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictClass {
    SafeCaution,
    SafeProgress,
    UnsafeCaution,
    UnsafeProgress,
    Accident,
    Block,
    SoftwareFailure,
}

impl VerdictClass {
    pub const ALL: [VerdictClass; 7] = [
        VerdictClass::SafeCaution,
        VerdictClass::SafeProgress,
        VerdictClass::UnsafeCaution,
        VerdictClass::UnsafeProgress,
        VerdictClass::Accident,
        VerdictClass::Block,
        VerdictClass::SoftwareFailure,
    ];

    pub fn of(v: &Verdict) -> Self {
        match v {
            Verdict::SafeCaution => VerdictClass::SafeCaution,
            Verdict::SafeProgress => VerdictClass::SafeProgress,
            Verdict::UnsafeCaution(_) => VerdictClass::UnsafeCaution,
            Verdict::UnsafeProgress(_) => VerdictClass::UnsafeProgress,
            Verdict::EgoAccident | Verdict::ArrivingAccident => VerdictClass::Accident,
            Verdict::Blocked => VerdictClass::Block,
            Verdict::SoftwareFailure => VerdictClass::SoftwareFailure,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            VerdictClass::SafeCaution => "safe-caution",
            VerdictClass::SafeProgress => "safe-progress",
            VerdictClass::UnsafeCaution => "unsafe-caution",
            VerdictClass::UnsafeProgress => "unsafe-progress",
            VerdictClass::Accident => "accident",
            VerdictClass::Block => "block",
            VerdictClass::SoftwareFailure => "software-failure",
        }
    }

    fn colour(&self) -> &'static str {
        match self {
            VerdictClass::SafeCaution => "#9ecae1",
            VerdictClass::SafeProgress => "#74c476",
            VerdictClass::UnsafeCaution => "#fdd0a2",
            VerdictClass::UnsafeProgress => "#fd8d3c",
            VerdictClass::Accident => "#cb181d",
            VerdictClass::Block => "#756bb1",
            VerdictClass::SoftwareFailure => "#636363",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_a: Option<f64>,
    pub x_f: f64,
    pub verdict: Verdict,
}

/// Verdicts of one context at one ego speed. Cells are sparse because
/// refinement only adds cases near class boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictGrid {
    pub kind: VistaKind,
    pub v_e: f64,
    pub x_f_axis: Vec<f64>,
    /// Empty for contexts without an arriving vehicle.
    pub x_a_axis: Vec<f64>,
    /// Sorted by `x_f`, then `x_a`.
    pub cells: Vec<GridCell>,
    pub criticals: CriticalValues,
}

fn sorted_axis(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

impl VerdictGrid {
    pub fn cell(&self, x_a: Option<f64>, x_f: f64) -> Option<&GridCell> {
        self.cells.iter().find(|c| c.x_a == x_a && c.x_f == x_f)
    }

    pub fn is_one_dimensional(&self) -> bool {
        self.x_a_axis.is_empty()
    }
}

/// Assembles one grid from records sharing a context and ego speed.
/// Every case in `expected` must have exactly one record; further records
/// (refinement cases) are merged into the axes.
pub fn build_grid(
    records: &[VerdictRecord],
    expected: &[TestCase],
    criticals: CriticalValues,
) -> Result<VerdictGrid, ReportError> {
    let first = records.first().ok_or(ReportError::Empty)?;
    let (kind, v_e) = (first.case.context.kind, first.case.v_e);
    let mut seen = BTreeSet::new();
    for r in records {
        if r.case.context.kind != kind || r.case.v_e != v_e {
            return Err(ReportError::Mixed(format!(
                "{} at v_e={} alongside {} at v_e={}",
                r.case.context.kind, r.case.v_e, kind, v_e
            )));
        }
        if !seen.insert(r.case.key()) {
            return Err(ReportError::Duplicate(r.case.key()));
        }
    }
    let missing: Vec<CaseKey> = expected.iter().map(TestCase::key).filter(|k| !seen.contains(k)).collect();
    if !missing.is_empty() {
        return Err(ReportError::Incomplete(missing));
    }

    let mut cells: Vec<GridCell> =
        records.iter().map(|r| GridCell { x_a: r.case.x_a, x_f: r.case.x_f, verdict: r.verdict.clone() }).collect();
    cells.sort_by(|a, b| a.x_f.total_cmp(&b.x_f).then_with(|| a.x_a.unwrap_or(0.0).total_cmp(&b.x_a.unwrap_or(0.0))));
    Ok(VerdictGrid {
        kind,
        v_e,
        x_f_axis: sorted_axis(cells.iter().map(|c| c.x_f)),
        x_a_axis: sorted_axis(cells.iter().filter_map(|c| c.x_a)),
        cells,
        criticals,
    })
}

/// Splits records by `(kind, v_e)` in ascending order.
pub fn group_records(records: &[VerdictRecord]) -> BTreeMap<(VistaKind, i64), Vec<VerdictRecord>> {
    let mut out: BTreeMap<(VistaKind, i64), Vec<VerdictRecord>> = BTreeMap::new();
    for r in records {
        out.entry((r.case.context.kind, r.case.key().v_e_mm)).or_default().push(r.clone());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FindingKind {
    IrrationalSafety,
    IrrationalPerformance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellRef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_a: Option<f64>,
    pub x_f: f64,
}

impl CellRef {
    fn of(c: &GridCell) -> Self {
        CellRef { x_a: c.x_a, x_f: c.x_f }
    }

    fn le(&self, other: &CellRef) -> bool {
        self.x_f <= other.x_f && self.x_a.unwrap_or(0.0) <= other.x_a.unwrap_or(0.0)
    }

    fn distance(&self, other: &CellRef) -> f64 {
        (other.x_f - self.x_f).abs() + (other.x_a.unwrap_or(0.0) - self.x_a.unwrap_or(0.0)).abs()
    }
}

/// A safe-progress cell dominated by a cell with a worse outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalityFinding {
    pub kind: FindingKind,
    pub context: VistaKind,
    pub v_e: f64,
    pub progress_cell: CellRef,
    pub dominating_cell: CellRef,
    pub dominating_verdict: Verdict,
}

fn finding_kind(v: &Verdict) -> Option<FindingKind> {
    match v {
        Verdict::SafeProgress => None,
        Verdict::SafeCaution => Some(FindingKind::IrrationalPerformance),
        _ => Some(FindingKind::IrrationalSafety),
    }
}

/// Picks the closer witness; ties go to the larger `x_f`, then larger `x_a`.
fn closer(candidate: CellRef, current: Option<CellRef>, target: &CellRef) -> CellRef {
    match current {
        None => candidate,
        Some(cur) => {
            let (dc, dk) = (candidate.distance(target), cur.distance(target));
            let key = |c: &CellRef| (c.x_f, c.x_a.unwrap_or(0.0));
            if dc < dk || (dc == dk && key(&candidate) > key(&cur)) {
                candidate
            } else {
                cur
            }
        }
    }
}

/// Safe-progress cells grouped in rows of equal `x_f`, each sorted by `x_a`.
struct ProgressRows {
    rows: Vec<(f64, Vec<f64>)>,
}

impl ProgressRows {
    fn new(cells: &[GridCell]) -> Self {
        let mut map: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
        for c in cells.iter().filter(|c| c.verdict == Verdict::SafeProgress) {
            // Non-negative floats order like their bit patterns.
            map.entry(c.x_f.to_bits()).or_insert((c.x_f, Vec::new())).1.push(c.x_a.unwrap_or(0.0));
        }
        let mut rows: Vec<(f64, Vec<f64>)> = map.into_values().collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (_, xs) in &mut rows {
            xs.sort_by(f64::total_cmp);
        }
        ProgressRows { rows }
    }

    /// The closest safe-progress cell at or below `bad`, if any.
    fn closest_dominated(&self, bad: &CellRef, one_dimensional: bool) -> Option<CellRef> {
        let x_a = bad.x_a.unwrap_or(0.0);
        let mut best = None;
        for (x_f, xs) in self.rows.iter().take_while(|(x_f, _)| *x_f <= bad.x_f) {
            let idx = xs.partition_point(|&a| a <= x_a);
            if idx > 0 {
                let cand = CellRef { x_a: (!one_dimensional).then_some(xs[idx - 1]), x_f: *x_f };
                best = Some(closer(cand, best, bad));
            }
        }
        best
    }
}

fn finding(grid: &VerdictGrid, kind: FindingKind, progress: CellRef, bad: &GridCell) -> RationalityFinding {
    RationalityFinding {
        kind,
        context: grid.kind,
        v_e: grid.v_e,
        progress_cell: progress,
        dominating_cell: CellRef::of(bad),
        dominating_verdict: bad.verdict.clone(),
    }
}

/// Finds cells that do worse than a safe-progress cell they dominate.
/// Each offending cell is reported once, paired with its closest dominated
/// safe-progress cell; `all_pairs` lists every dominated cell instead.
pub fn check_upward_closure(grid: &VerdictGrid, all_pairs: bool) -> Vec<RationalityFinding> {
    dominance_scan(grid, &grid.cells, all_pairs)
}

/// Compares `grid` against a reference grid of the same context: every cell
/// of `grid` that does not achieve safe progress where the reference
/// reaches it at the same or a dominated point is a finding.
pub fn check_against_reference(
    grid: &VerdictGrid,
    reference: &VerdictGrid,
    all_pairs: bool,
) -> Vec<RationalityFinding> {
    dominance_scan(grid, &reference.cells, all_pairs)
}

fn dominance_scan(grid: &VerdictGrid, progress_source: &[GridCell], all_pairs: bool) -> Vec<RationalityFinding> {
    let one_d = grid.is_one_dimensional();
    let mut out = Vec::new();
    if all_pairs {
        for bad in &grid.cells {
            let Some(kind) = finding_kind(&bad.verdict) else { continue };
            let target = CellRef::of(bad);
            for p in progress_source.iter().filter(|p| p.verdict == Verdict::SafeProgress) {
                if CellRef::of(p).le(&target) {
                    out.push(finding(grid, kind, CellRef::of(p), bad));
                }
            }
        }
        return out;
    }
    let rows = ProgressRows::new(progress_source);
    for bad in &grid.cells {
        let Some(kind) = finding_kind(&bad.verdict) else { continue };
        if let Some(p) = rows.closest_dominated(&CellRef::of(bad), one_d) {
            out.push(finding(grid, kind, p, bad));
        }
    }
    out
}

/// Quadratic reference scan with the same witness choice as the row scan.
pub fn check_upward_closure_brute_force(grid: &VerdictGrid) -> Vec<RationalityFinding> {
    let mut out = Vec::new();
    for bad in &grid.cells {
        let Some(kind) = finding_kind(&bad.verdict) else { continue };
        let target = CellRef::of(bad);
        let mut best = None;
        for p in grid.cells.iter().filter(|p| p.verdict == Verdict::SafeProgress) {
            if CellRef::of(p).le(&target) {
                best = Some(closer(CellRef::of(p), best, &target));
            }
        }
        if let Some(p) = best {
            out.push(finding(grid, kind, p, bad));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub count: usize,
    /// Percentage of all cases, rounded to two decimals.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub verdicts: Vec<SummaryRow>,
    pub classes: Vec<SummaryRow>,
}

const CODE_ORDER: [&str; 8] = ["CS", "PS", "CU", "PU", "Ae", "Aa", "Blk", "Fsw"];

/// Rounds shares to hundredths of a percent so they add up to exactly 100,
/// handing leftover hundredths to the largest remainders.
fn apportion(counts: &[usize], total: usize) -> Vec<f64> {
    if total == 0 {
        return vec![0.0; counts.len()];
    }
    let exact: Vec<f64> = counts.iter().map(|&c| c as f64 * 10_000.0 / total as f64).collect();
    let mut units: Vec<u64> = exact.iter().map(|e| e.floor() as u64).collect();
    let nonzero = counts.iter().filter(|&&c| c > 0).count() as u64;
    let short = 10_000u64.saturating_sub(units.iter().sum());
    let mut order: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] > 0).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().take(short.min(nonzero) as usize) {
        units[i] += 1;
    }
    units.iter().map(|&u| u as f64 / 100.0).collect()
}

pub fn summarize(grids: &[VerdictGrid]) -> Summary {
    let mut by_code: BTreeMap<&str, usize> = BTreeMap::new();
    let mut by_class: BTreeMap<VerdictClass, usize> = BTreeMap::new();
    let mut total = 0;
    for cell in grids.iter().flat_map(|g| &g.cells) {
        *by_code.entry(cell.verdict.code()).or_default() += 1;
        *by_class.entry(VerdictClass::of(&cell.verdict)).or_default() += 1;
        total += 1;
    }
    let code_counts: Vec<usize> = CODE_ORDER.iter().map(|c| by_code.get(c).copied().unwrap_or(0)).collect();
    let class_counts: Vec<usize> = VerdictClass::ALL.iter().map(|c| by_class.get(c).copied().unwrap_or(0)).collect();
    let rows = |labels: Vec<String>, counts: &[usize]| -> Vec<SummaryRow> {
        labels
            .into_iter()
            .zip(counts)
            .zip(apportion(counts, total))
            .map(|((label, &count), percent)| SummaryRow { label, count, percent })
            .collect()
    };
    Summary {
        total,
        verdicts: rows(CODE_ORDER.iter().map(|s| s.to_string()).collect(), &code_counts),
        classes: rows(VerdictClass::ALL.iter().map(|c| c.as_str().to_string()).collect(), &class_counts),
    }
}

impl Summary {
    /// Plain-text table of verdict codes then classes.
    pub fn render(&self) -> String {
        let mut s = format!("{:<18} {:>6} {:>8}\n", "verdict", "count", "share");
        for r in &self.verdicts {
            let _ = writeln!(s, "{:<18} {:>6} {:>7.2}%", r.label, r.count, r.percent);
        }
        s.push('\n');
        for r in &self.classes {
            let _ = writeln!(s, "{:<18} {:>6} {:>7.2}%", r.label, r.count, r.percent);
        }
        let _ = writeln!(s, "{:<18} {:>6}", "total", self.total);
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = ReportError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" | "svg-heatmap" => Ok(Format::Svg),
            other => Err(ReportError::UnsupportedFormat(other.to_string())),
        }
    }
}

/// File name for a rendered grid.
pub fn file_name(kind: VistaKind, v_e: f64, format: Format) -> String {
    format!("{}-{}.{}", kind, v_e, format.extension())
}

pub fn emit(grid: &VerdictGrid, format: Format) -> String {
    match format {
        Format::Csv => to_csv(grid),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(grid).expect("grids serialize");
            s.push('\n');
            s
        }
        Format::Svg => to_svg(grid),
    }
}

/// Index of the first axis value at or above `critical`.
fn critical_index(axis: &[f64], critical: Option<f64>) -> Option<usize> {
    let c = critical?;
    axis.iter().position(|&v| v >= c - 1e-9)
}

fn axis_label(value: f64, marked: bool) -> String {
    if marked {
        format!("{value}*")
    } else {
        value.to_string()
    }
}

fn to_csv(grid: &VerdictGrid) -> String {
    let row_mark = critical_index(&grid.x_f_axis, Some(grid.criticals.x_f));
    let mut out = String::new();
    if grid.is_one_dimensional() {
        out.push_str("x_f,verdict\n");
        for (i, &x_f) in grid.x_f_axis.iter().enumerate() {
            let v = grid.cell(None, x_f).map(|c| c.verdict.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{}", axis_label(x_f, row_mark == Some(i)), v);
        }
        return out;
    }
    let col_mark = critical_index(&grid.x_a_axis, grid.criticals.x_a);
    out.push_str("x_f\\x_a");
    for (j, &x_a) in grid.x_a_axis.iter().enumerate() {
        let _ = write!(out, ",{}", axis_label(x_a, col_mark == Some(j)));
    }
    out.push('\n');
    for (i, &x_f) in grid.x_f_axis.iter().enumerate() {
        out.push_str(&axis_label(x_f, row_mark == Some(i)));
        for &x_a in &grid.x_a_axis {
            let v = grid.cell(Some(x_a), x_f).map(|c| c.verdict.to_string()).unwrap_or_default();
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

const CELL: f64 = 24.0;
const MARGIN: f64 = 60.0;

/// Position of a value on an axis drawn with one cell per axis entry,
/// interpolating between neighbouring entries.
fn axis_position(axis: &[f64], value: f64) -> f64 {
    match axis.iter().position(|&v| v >= value) {
        None => axis.len() as f64,
        Some(0) => 0.0,
        Some(i) => {
            let (lo, hi) = (axis[i - 1], axis[i]);
            (i - 1) as f64 + 0.5 + (value - lo) / (hi - lo)
        }
    }
}

fn to_svg(grid: &VerdictGrid) -> String {
    let cols = grid.x_a_axis.len().max(1);
    let rows = grid.x_f_axis.len();
    let (w, h) = (MARGIN * 2.0 + cols as f64 * CELL, MARGIN * 2.0 + rows as f64 * CELL);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<title>{} v_e={} ({} cells)</title>"#, grid.kind, grid.v_e, grid.cells.len());
    // x_f grows upwards, x_a to the right.
    let top = |row: usize| MARGIN + (rows - 1 - row) as f64 * CELL;
    for c in &grid.cells {
        let row = grid.x_f_axis.iter().position(|&v| v == c.x_f).unwrap_or(0);
        let col = c.x_a.and_then(|a| grid.x_a_axis.iter().position(|&v| v == a)).unwrap_or(0);
        let class = VerdictClass::of(&c.verdict);
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{}" stroke="white" class="{}"><title>x_a={} x_f={}: {}</title></rect>"#,
            MARGIN + col as f64 * CELL,
            top(row),
            class.colour(),
            class.as_str(),
            c.x_a.map_or("-".to_string(), |a| a.to_string()),
            c.x_f,
            c.verdict
        );
    }
    let right = MARGIN + cols as f64 * CELL;
    let bottom = MARGIN + rows as f64 * CELL;
    let y = bottom - axis_position(&grid.x_f_axis, grid.criticals.x_f) * CELL;
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{y}" x2="{right}" y2="{y}" stroke="black" stroke-dasharray="4 2" class="critical-x-f"/>"#
    );
    if let Some(x_a) = grid.criticals.x_a.filter(|_| !grid.is_one_dimensional()) {
        let x = MARGIN + axis_position(&grid.x_a_axis, x_a) * CELL;
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="{MARGIN}" x2="{x}" y2="{bottom}" stroke="black" stroke-dasharray="4 2" class="critical-x-a"/>"#
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">x_a</text>"#, (MARGIN + right) / 2.0, h - 20.0);
    let _ = writeln!(s, r#"<text x="20" y="{}" text-anchor="middle">x_f</text>"#, (MARGIN + bottom) / 2.0);
    s.push_str("</svg>\n");
    s
}
