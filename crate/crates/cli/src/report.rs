//! Merge result envelopes in a directory into `summary.json` and `summary.txt`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::output::{format_number, write_atomic, ENVELOPE_SCHEMA};

pub const SUMMARY_SCHEMA: &str = "zeno.summary/1";

#[derive(Debug)]
pub struct Envelope {
    pub file: String,
    pub value: Value,
}

impl Envelope {
    fn str(&self, key: &str) -> &str {
        self.value.get(key).and_then(Value::as_str).unwrap_or("")
    }

    fn version(&self) -> u64 {
        self.value.get("artifact_version").and_then(Value::as_u64).unwrap_or(0)
    }
}

/// Envelopes in `dir`, in file-name order. Other JSON files are skipped.
pub fn load_envelopes(dir: &Path) -> std::io::Result<Vec<Envelope>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for path in files {
        let Ok(text) = fs::read_to_string(&path) else { continue };
        let Ok(value) = serde_json::from_str::<Value>(&text) else { continue };
        if value.get("schema").and_then(Value::as_str) != Some(ENVELOPE_SCHEMA) {
            continue;
        }
        let file = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        out.push(Envelope { file, value });
    }
    Ok(out)
}

pub struct Summary {
    pub json: Value,
    pub text: String,
    pub warnings: Vec<String>,
}

fn num(v: &Value, key: &str) -> Option<f64> {
    v.get(key).and_then(Value::as_f64)
}

fn cell(v: Option<f64>) -> String {
    v.map(format_number).unwrap_or_else(|| "-".into())
}

pub fn summarize(envelopes: &[Envelope]) -> Summary {
    let versions: BTreeSet<u64> = envelopes.iter().map(Envelope::version).collect();
    let mut warnings = Vec::new();
    if versions.len() > 1 {
        warnings.push(format!(
            "mixed artifact versions {:?}; rows carry an artifact_version column",
            versions.iter().collect::<Vec<_>>()
        ));
    }

    // key order, not discovery order, decides the layout
    let mut sorted: Vec<&Envelope> = envelopes.iter().collect();
    sorted.sort_by(|a, b| (a.str("kind"), a.str("config_hash"), &a.file).cmp(&(b.str("kind"), b.str("config_hash"), &b.file)));

    let entries: Vec<Value> = sorted
        .iter()
        .map(|e| {
            json!({
                "file": e.file,
                "kind": e.str("kind"),
                "config_hash": e.str("config_hash"),
                "series_key": e.str("series_key"),
                "artifact_version": e.version(),
                "wall_clock_seconds": e.value.get("wall_clock_seconds"),
                "flags": e.value.get("flags"),
                "counters": e.value.get("counters"),
                "payload": e.value.get("payload"),
            })
        })
        .collect();

    // fidelity curves: one series per config with the N ladder removed
    let mut series: BTreeMap<String, BTreeMap<u64, Value>> = BTreeMap::new();
    for e in sorted.iter().filter(|e| e.str("kind") == "zeno-run") {
        let points = e.value.pointer("/payload/report/points").and_then(Value::as_array);
        for p in points.into_iter().flatten() {
            let Some(n) = p.get("n").and_then(Value::as_u64) else { continue };
            let row = json!({
                "n": n,
                "tau": p.get("tau"),
                "fidelity": p.get("fidelity"),
                "residual": p.get("residual"),
                "norm": p.get("norm"),
                "phase": p.get("phase"),
                "config_hash": e.str("config_hash"),
                "artifact_version": e.version(),
            });
            // first envelope in key order wins on a repeated N
            series.entry(e.str("series_key").to_string()).or_default().entry(n).or_insert(row);
        }
    }
    let convergence: Vec<Value> = series
        .iter()
        .map(|(key, rows)| json!({ "series_key": key, "rows": rows.values().collect::<Vec<_>>() }))
        .collect();

    let mut slopes = Vec::new();
    for e in &sorted {
        let rows = e.value.pointer("/payload/report/residual_fit").into_iter().chain(
            ["leakage_fit", "smoothed_projector_fit", "operator_norm_fit"]
                .iter()
                .filter_map(|k| e.value.pointer(&format!("/payload/{k}"))),
        );
        for (i, f) in rows.enumerate().filter(|(_, f)| !f.is_null()) {
            let quantity = match (e.str("kind"), i) {
                ("zeno-run", _) => "residual",
                ("leakage", 0) => "leakage",
                ("leakage", _) => "operator_norm",
                _ => "smoothed_projector_error",
            };
            slopes.push(json!({
                "kind": e.str("kind"),
                "config_hash": e.str("config_hash"),
                "quantity": quantity,
                "exponent": f.get("exponent"),
                "r2": f.get("r2"),
                "accepted": f.get("accepted"),
                "artifact_version": e.version(),
            }));
        }
        if let Some(fits) = e.value.pointer("/payload/fits").and_then(Value::as_array) {
            for f in fits.iter().filter(|f| !f["fit"].is_null()) {
                slopes.push(json!({
                    "kind": e.str("kind"),
                    "config_hash": e.str("config_hash"),
                    "quantity": f.get("quantity"),
                    "exponent": f["fit"].get("exponent"),
                    "r2": f["fit"].get("r2"),
                    "accepted": f["fit"].get("accepted"),
                    "artifact_version": e.version(),
                }));
            }
        }
    }

    let mut reductions = Vec::new();
    for e in sorted.iter().filter(|e| e.str("kind") == "reduce") {
        let family = e.value.pointer("/payload/plan/family/family").cloned().unwrap_or(Value::Null);
        let levels: Vec<Value> = e
            .value
            .pointer("/payload/levels")
            .and_then(Value::as_array)
            .into_iter()
            .flatten()
            .map(|l| {
                json!({
                    "label": l.get("label"),
                    "c0": l.pointer("/fit/coefficients/0"),
                    "rms_residual": l.pointer("/fit/rms_residual"),
                    "uncertainty": l.pointer("/fit/uncertainty"),
                    "limit": l.get("limit"),
                    "reduced": l.get("reduced"),
                })
            })
            .collect();
        reductions.push(json!({
            "config_hash": e.str("config_hash"),
            "family": family,
            "artifact_version": e.version(),
            "levels": levels,
            "offset": e.value.pointer("/payload/offset"),
        }));
    }

    let json = json!({
        "schema": SUMMARY_SCHEMA,
        "artifact_versions": versions,
        "warnings": warnings,
        "envelopes": entries,
        "convergence": convergence,
        "slopes": slopes,
        "reductions": reductions,
    });
    let text = render_text(&json);
    Summary { json, text, warnings }
}

fn render_text(s: &Value) -> String {
    let mut out = String::new();
    let arr = |k: &str| s.get(k).and_then(Value::as_array).cloned().unwrap_or_default();
    let _ = writeln!(out, "envelopes: {}", arr("envelopes").len());
    for w in arr("warnings") {
        let _ = writeln!(out, "warning: {}", w.as_str().unwrap_or_default());
    }
    for e in arr("envelopes") {
        let _ = writeln!(
            out,
            "  {:<14} {} v{} {}",
            e["kind"].as_str().unwrap_or_default(),
            &e["config_hash"].as_str().unwrap_or_default().chars().take(12).collect::<String>(),
            e["artifact_version"],
            e["file"].as_str().unwrap_or_default()
        );
    }
    for c in arr("convergence") {
        let key: String = c["series_key"].as_str().unwrap_or_default().chars().take(12).collect();
        let _ = writeln!(out, "\nconvergence series {key}");
        let _ = writeln!(out, "{:>8} {:>24} {:>24} {:>24} {:>3}", "N", "fidelity", "residual", "phase", "ver");
        for r in c["rows"].as_array().into_iter().flatten() {
            let _ = writeln!(
                out,
                "{:>8} {:>24} {:>24} {:>24} {:>3}",
                r["n"].as_u64().unwrap_or(0),
                cell(num(r, "fidelity")),
                cell(num(r, "residual")),
                cell(num(r, "phase")),
                r["artifact_version"]
            );
        }
    }
    let slopes = arr("slopes");
    if !slopes.is_empty() {
        let _ = writeln!(out, "\nfitted slopes");
        let _ = writeln!(out, "{:<14} {:<40} {:>24} {:>10} {:>8} {:>3}", "kind", "quantity", "exponent", "r2", "accepted", "ver");
        for f in slopes {
            let _ = writeln!(
                out,
                "{:<14} {:<40} {:>24} {:>10} {:>8} {:>3}",
                f["kind"].as_str().unwrap_or_default(),
                f["quantity"].as_str().unwrap_or_default(),
                cell(num(&f, "exponent")),
                num(&f, "r2").map(|v| format!("{v:.5}")).unwrap_or_else(|| "-".into()),
                f["accepted"],
                f["artifact_version"]
            );
        }
    }
    for r in arr("reductions") {
        let _ = writeln!(
            out,
            "\nreduction {} ({})",
            r["family"].as_str().unwrap_or_default(),
            r["config_hash"].as_str().unwrap_or_default().chars().take(12).collect::<String>()
        );
        let _ = writeln!(out, "{:<16} {:>24} {:>24} {:>24} {:>3}", "level", "c0", "rms_residual", "reduced", "ver");
        for l in r["levels"].as_array().into_iter().flatten() {
            let label = l["label"].as_object().map(|o| {
                o.iter().filter(|(k, _)| *k != "family").map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
            });
            let _ = writeln!(
                out,
                "{:<16} {:>24} {:>24} {:>24} {:>3}",
                label.unwrap_or_default(),
                cell(num(l, "c0")),
                cell(num(l, "rms_residual")),
                cell(num(l, "reduced")),
                r["artifact_version"]
            );
        }
        if let Some(o) = r.get("offset").filter(|o| !o.is_null()) {
            let _ = writeln!(
                out,
                "offset {} expected {} +- {}",
                cell(num(o, "value")),
                cell(num(o, "expected")),
                cell(num(o, "uncertainty"))
            );
        }
    }
    out
}

/// Write the summary next to the envelopes.
pub fn write_summary(dir: &Path, summary: &Summary) -> std::io::Result<Vec<PathBuf>> {
    let json_path = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&summary.json).expect("summary serialises");
    text.push('\n');
    write_atomic(&json_path, text.as_bytes())?;
    let txt_path = dir.join("summary.txt");
    write_atomic(&txt_path, summary.text.as_bytes())?;
    Ok(vec![json_path, txt_path])
}
