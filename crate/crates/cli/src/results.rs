//! The on-disk layout of a sweep directory.
//!
//! * `manifest.json`: the resolved specs the records belong to
//! * `verdicts.partial.jsonl`: records appended as cases finish
//! * `verdicts.jsonl`: every record, sorted by case, written at the end
//! * `{kind}-{ve}.{csv,json,svg}`, `summary.txt`, `summary.json`,
//!   `findings.json`: the report

use anyhow::{bail, Context, Result};
use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use vistacheck_core::criticality::{critical_values, CaseKey};
use vistacheck_core::oracle::VerdictRecord;
use vistacheck_core::report::{
    build_grid, check_against_reference, check_upward_closure, emit, file_name, group_records, summarize, Format,
    RationalityFinding, VerdictGrid,
};
use vistacheck_core::sweep::SweepSpec;

pub const MANIFEST: &str = "manifest.json";
pub const PARTIAL: &str = "verdicts.partial.jsonl";
pub const VERDICTS: &str = "verdicts.jsonl";

pub struct ResultDir {
    pub root: PathBuf,
}

impl ResultDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating output directory {}", root.display()))?;
        let probe = root.join(".write-check");
        File::create(&probe).with_context(|| format!("output directory {} is not writable", root.display()))?;
        let _ = fs::remove_file(probe);
        Ok(ResultDir { root: root.to_path_buf() })
    }

    pub fn open(root: &Path) -> Result<Self> {
        if !root.join(MANIFEST).is_file() {
            bail!("{} holds no sweep results ({} missing)", root.display(), MANIFEST);
        }
        Ok(ResultDir { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn load_specs(&self) -> Result<Vec<SweepSpec>> {
        let text = fs::read_to_string(self.path(MANIFEST))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", MANIFEST))
    }

    /// Records the specs, refusing to mix results of different manifests.
    pub fn bind_specs(&self, specs: &[SweepSpec], fresh: bool) -> Result<()> {
        if fresh {
            for name in [PARTIAL, VERDICTS] {
                let _ = fs::remove_file(self.path(name));
            }
        } else if self.path(MANIFEST).is_file() {
            let stored = self.load_specs()?;
            if stored != specs {
                bail!("{} holds results of a different manifest; pass --fresh to discard them", self.root.display());
            }
        }
        write_atomic(&self.path(MANIFEST), &(serde_json::to_string_pretty(specs)? + "\n"))
    }

    /// Records from earlier runs. A torn final line from an interrupted run
    /// is skipped.
    pub fn load_records(&self) -> Result<Vec<VerdictRecord>> {
        let mut by_key: BTreeMap<CaseKey, VerdictRecord> = BTreeMap::new();
        for name in [VERDICTS, PARTIAL] {
            let path = self.path(name);
            let Ok(file) = File::open(&path) else { continue };
            let lines: Vec<String> = BufReader::new(file).lines().collect::<std::io::Result<_>>()?;
            let last = lines.len().saturating_sub(1);
            for (i, line) in lines.iter().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                match serde_json::from_str::<VerdictRecord>(line) {
                    Ok(r) => {
                        by_key.insert(r.case.key(), r);
                    }
                    Err(_) if i == last && name == PARTIAL => {}
                    Err(e) => bail!("{}:{}: {e}", path.display(), i + 1),
                }
            }
        }
        Ok(by_key.into_values().collect())
    }

    pub fn partial_writer(&self) -> Result<PartialWriter> {
        let file = OpenOptions::new().create(true).append(true).open(self.path(PARTIAL))?;
        Ok(PartialWriter(Mutex::new(BufWriter::new(file))))
    }

    /// Writes the sorted record set and drops the partial log.
    pub fn finish(&self, records: &[VerdictRecord]) -> Result<()> {
        let mut sorted: Vec<&VerdictRecord> = records.iter().collect();
        sorted.sort_by_key(|r| r.case.key());
        let mut text = String::new();
        for r in sorted {
            text.push_str(&serde_json::to_string(r)?);
            text.push('\n');
        }
        write_atomic(&self.path(VERDICTS), &text)?;
        let _ = fs::remove_file(self.path(PARTIAL));
        Ok(())
    }
}

pub struct PartialWriter(Mutex<BufWriter<File>>);

impl PartialWriter {
    pub fn append(&self, record: &VerdictRecord) {
        let line = serde_json::to_string(record).expect("records serialize");
        let mut w = self.0.lock().unwrap_or_else(|e| e.into_inner());
        // The log only speeds up resumption, so write errors are not fatal.
        let _ = writeln!(w, "{line}").and_then(|_| w.flush());
    }
}

pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Grids for every `(kind, v_e)` present in `records`.
pub fn build_grids(specs: &[SweepSpec], records: &[VerdictRecord]) -> Result<Vec<VerdictGrid>> {
    let mut grids = Vec::new();
    for ((kind, _), recs) in group_records(records) {
        let Some(spec) = specs.iter().find(|s| s.context.kind == kind) else {
            bail!("records for {kind} but the manifest has no such context");
        };
        let v_e = recs[0].case.v_e;
        let expected: Vec<_> = spec.coarse_cases()?.into_iter().filter(|c| c.v_e == v_e).collect();
        let criticals = critical_values(&spec.context, &spec.ego_profile, v_e)?;
        grids.push(build_grid(&recs, &expected, criticals).with_context(|| format!("{kind} at v_e={v_e}"))?);
    }
    Ok(grids)
}

pub struct ReportOptions<'a> {
    pub formats: &'a [Format],
    pub all_pairs: bool,
    pub reference: Option<&'a [VerdictGrid]>,
}

pub struct ReportOutcome {
    pub grids: usize,
    pub findings: usize,
    pub reference_findings: Option<usize>,
}

pub fn write_report(dir: &Path, grids: &[VerdictGrid], opts: &ReportOptions) -> Result<ReportOutcome> {
    for g in grids {
        for &f in opts.formats {
            write_atomic(&dir.join(file_name(g.kind, g.v_e, f)), &emit(g, f))?;
        }
    }
    let summary = summarize(grids);
    write_atomic(&dir.join("summary.txt"), &summary.render())?;
    write_atomic(&dir.join("summary.json"), &(serde_json::to_string_pretty(&summary)? + "\n"))?;

    let findings: Vec<RationalityFinding> =
        grids.iter().flat_map(|g| check_upward_closure(g, opts.all_pairs)).collect();
    write_atomic(&dir.join("findings.json"), &(serde_json::to_string_pretty(&findings)? + "\n"))?;

    let reference_findings = match opts.reference {
        None => None,
        Some(reference) => {
            let mut out = Vec::new();
            for g in grids {
                if let Some(r) = reference.iter().find(|r| r.kind == g.kind && r.v_e == g.v_e) {
                    out.extend(check_against_reference(g, r, opts.all_pairs));
                }
            }
            write_atomic(&dir.join("reference-findings.json"), &(serde_json::to_string_pretty(&out)? + "\n"))?;
            Some(out.len())
        }
    };
    Ok(ReportOutcome { grids: grids.len(), findings: findings.len(), reference_findings })
}
