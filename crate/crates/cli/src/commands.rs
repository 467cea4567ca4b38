use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use limclust::config::Config;
use limclust::generators::{families, generate, Family};
use limclust::globular::{
    clip_comb, cluster_sequence, Status,
};
use limclust::logic::parse_formula;
use limclust::sequences::{classify, Classification, StructureSequence, SubsetSequence};
use limclust::spectrum::{detect_spectrum, BallMeasureSample, SpectrumReport};
use limclust::structure::{read_structure, structure_to_json};
use limclust::{stone_pairing, Error, Formula, Result};
use serde_json::{json, Value};

use super::{ClusterArgs, Command, GenerateArgs, PairingArgs, ReportArgs, SequenceArgs};

/// Runs one subcommand; `Ok(false)` means some verification check failed.
pub fn run(command: &Command, cfg: &Config) -> Result<bool> {
    match command {
        Command::Generate(args) => generate_cmd(args, cfg),
        Command::Pairing(args) => pairing_cmd(args, cfg),
        Command::Spectrum(args) => spectrum_cmd(args, cfg),
        Command::Cluster(args) => cluster_cmd(args, cfg),
        Command::Verify(args) => verify_cmd(args, cfg),
        Command::Report(args) => report_cmd(args),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).map_err(|e| Error::File { path: path.display().to_string(), message: e.to_string() })
}

fn read_json(path: &Path) -> Result<Value> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::File { path: path.display().to_string(), message: e.to_string() })?;
    serde_json::from_str(&text).map_err(|e| Error::File { path: path.display().to_string(), message: e.to_string() })
}

/// One formula per non-empty line; `#` starts a comment.
fn read_formulas(path: &Path) -> Result<Vec<Formula>> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::File { path: path.display().to_string(), message: e.to_string() })?;
    text.lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let line = line.split('#').next().unwrap_or("").trim();
            (!line.is_empty()).then_some((i, line))
        })
        .map(|(i, line)| {
            parse_formula(line).map_err(|e| Error::File {
                path: path.display().to_string(),
                message: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}

fn generate_cmd(args: &GenerateArgs, cfg: &Config) -> Result<bool> {
    if args.list {
        for f in families() {
            println!("{}\n  params: {}\n  truth: {}", f.name, f.params, f.truth);
        }
        return Ok(true);
    }
    let name = args.family.as_deref().expect("required by the parser");
    let params: Value = serde_json::from_str(&args.params)
        .map_err(|e| Error::Input(format!("--params is not JSON: {e}")))?;
    let family = Family::from_parts(name, &params)?;
    let (start, end) = (args.range[0], args.range[1]);
    if start == 0 || start > end {
        return Err(Error::Input(format!("invalid range {start}..{end}")));
    }
    let mut files = Vec::new();
    for n in start..=end {
        let g = generate(&family, n)?;
        let file = format!("structure_{n}.json");
        write_json(&cfg.output.join(&file), &structure_to_json(&g.structure))?;
        write_json(&cfg.output.join(format!("truth_{n}.json")), &g.truth)?;
        files.push(file);
    }
    write_json(&cfg.output.join("manifest.json"), &json!({ "files": files, "start": start }))?;
    println!("wrote {} structures to {}", files.len(), cfg.output.display());
    Ok(true)
}

fn pairing_cmd(args: &PairingArgs, cfg: &Config) -> Result<bool> {
    let mut formulas: Vec<Formula> = args.formula.iter().map(|t| parse_formula(t)).collect::<Result<_>>()?;
    if let Some(path) = &args.formulas {
        formulas.extend(read_formulas(path)?);
    }
    if formulas.is_empty() {
        if let Some(path) = &cfg.battery {
            formulas = read_formulas(path)?;
        }
    }
    if let Some(path) = &args.structure {
        let s = read_structure(path)?;
        println!("formula\tvalue");
        for f in &formulas {
            println!("{f}\t{}", stone_pairing(f, &s)?);
        }
        return Ok(true);
    }
    let seq = StructureSequence::from_manifest(args.manifest.as_ref().expect("required by the parser"))?;
    let indices: Vec<usize> = seq.indices().collect();
    let rows = seq.map_indices(&indices, |_, s| formulas.iter().map(|f| stone_pairing(f, s)).collect::<Result<Vec<f64>>>())?;
    let header: Vec<String> = formulas.iter().map(ToString::to_string).collect();
    println!("n\t{}", header.join("\t"));
    for (n, row) in indices.iter().zip(rows) {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        println!("{n}\t{}", cells.join("\t"));
    }
    Ok(true)
}

fn atom_summary(report: &SpectrumReport) -> String {
    let lambdas: Vec<String> = report.atoms.iter().map(|a| a.lambda.to_string()).collect();
    let counts: Vec<String> = report.atoms.iter().map(|a| a.count.to_string()).collect();
    format!("atoms=[{}] N=[{}] residual={}", lambdas.join(", "), counts.join(", "), report.residual)
}

fn spectrum_cmd(args: &SequenceArgs, cfg: &Config) -> Result<bool> {
    let seq = StructureSequence::from_manifest(&args.manifest)?;
    let report = detect_spectrum(&seq, cfg)?;
    write_json(&cfg.output.join("spectrum.json"), &report)?;
    let last = seq.end();
    let sample = BallMeasureSample::new(&*seq.get(last)?, &report.radii);
    for (k, d) in report.radii.iter().enumerate() {
        write_text(&cfg.output.join(format!("cdf_n{last}_d{d}.csv")), &sample.cdf(k).to_csv())?;
    }
    println!("{}", atom_summary(&report));
    for w in &report.warnings {
        println!("warning: {w}");
    }
    Ok(true)
}

/// Schedule and assembly, or an all-residual clustering when there are no atoms.
fn cluster_cmd(args: &ClusterArgs, cfg: &Config) -> Result<bool> {
    let seq = StructureSequence::from_manifest(&args.manifest)?;
    let result = match &args.comb {
        Some(path) => {
            let doc = read_json(path)?;
            let items = doc.as_array().ok_or_else(|| Error::Input("--comb expects a JSON array".into()))?;
            let clusters = items.iter().map(|d| SubsetSequence::from_json(d, &seq)).collect::<Result<Vec<_>>>()?;
            clip_comb(&seq, &clusters, None, cfg)?
        }
        None => {
            let report = detect_spectrum(&seq, cfg)?;
            cluster_sequence(&seq, &report, cfg)?
        }
    };
    let out = &cfg.output;
    write_json(&out.join("clustering.json"), &json!({ "config": cfg, "clustering": result }))?;
    write_json(&out.join("labels.json"), &result.labels_json())?;
    match result.to_binary() {
        Ok(bytes) => fs::write(out.join("labels.lclr"), bytes)?,
        Err(e) => println!("warning: binary labels skipped: {e}"),
    }
    for n in seq.window(cfg.window) {
        let marked = result.marked_structure(&seq, n)?;
        write_json(&out.join("marked").join(format!("structure_{n}.json")), &structure_to_json(&marked))?;
    }
    let names: Vec<&str> = result.marks.iter().map(|m| m.name.as_str()).collect();
    println!("status={:?} marks=[{}]", result.status, names.join(", "));
    let (clusters, residual, separator) = result.mass_split(seq.end())?;
    println!("index {}: clusters={clusters} residual={residual} separator={separator}", seq.end());
    for v in result.violations.iter().filter(|v| seq.window(cfg.window).contains(&v.index)) {
        println!("violation at {}: {} {}", v.index, v.check, v.detail);
    }
    Ok(result.status == Status::Verified)
}

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

fn verify_cmd(args: &SequenceArgs, cfg: &Config) -> Result<bool> {
    let seq = StructureSequence::from_manifest(&args.manifest)?;
    let report = detect_spectrum(&seq, cfg)?;
    let mut checks = Vec::new();
    let mut check = |name: &str, pass: bool, detail: String| checks.push(Check { name: name.into(), pass, detail });

    check("spectrum", !report.unstable, atom_summary(&report));
    let mc = &report.moment_check;
    check(
        "moment-series",
        mc.max_deviation <= mc.truncation_bound + 1e-9,
        format!("deviation {} within bound {}", mc.max_deviation, mc.truncation_bound),
    );
    let worst_residue = report.atoms.iter().map(|a| a.residue).fold(0.0, f64::max);
    check("integrality", worst_residue <= 0.1, format!("largest distance of p/lambda from an integer: {worst_residue}"));
    if let Some(truth) = seq.truth(seq.end())? {
        let expected: Vec<_> = truth.atoms.iter().filter(|a| a.lambda >= cfg.lambda_min).collect();
        let matched = expected.len() == report.atoms.len()
            && expected
                .iter()
                .zip(&report.atoms)
                .all(|(t, a)| (t.lambda - a.lambda).abs() <= 0.02 && t.count == a.count);
        check(
            "ground-truth",
            matched,
            format!(
                "expected {:?}",
                expected.iter().map(|a| (a.lambda, a.count)).collect::<Vec<_>>()
            ),
        );
    }

    let result = cluster_sequence(&seq, &report, cfg)?;
    let window = seq.window(cfg.window);
    let tail_violations = result.violations_within(&window);
    check(
        "clustering-lemmas",
        tail_violations.is_empty(),
        match tail_violations.first() {
            Some(v) => format!("{} violations on the tail, first: {} at {}", tail_violations.len(), v.check, v.index),
            None => format!("{} total violations, none on the tail", result.violations.len()),
        },
    );
    for mark in result.marks.iter().filter(|m| m.kind.is_cluster()) {
        let set = result.select_sequence(|k| *k == mark.kind)?;
        let class = classify(&seq, &set, cfg)?.class;
        check(&format!("{}-class", mark.name), class == Classification::Globular, format!("{class:?}"));
    }
    let rest = result.select_sequence(|k| !k.is_cluster())?;
    let tail_mass = rest.measures(&seq)?.iter().filter(|(n, _)| window.contains(n)).map(|p| p.1).fold(0.0, f64::max);
    if tail_mass > cfg.tol {
        let class = classify(&seq, &rest, cfg)?.class;
        check(
            "residual-class",
            matches!(class, Classification::Residual | Classification::Open),
            format!("{class:?} (tail mass {tail_mass})"),
        );
    }

    let mut all = true;
    let mut lines = Vec::new();
    for c in &checks {
        all &= c.pass;
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        lines.push(json!({ "check": c.name, "pass": c.pass, "detail": c.detail }));
    }
    write_json(&cfg.output.join("verify.json"), &json!({ "config": cfg, "checks": lines, "pass": all }))?;
    Ok(all)
}

fn report_cmd(args: &ReportArgs) -> Result<bool> {
    let dir = &args.input;
    let mut out = String::new();
    let mut found = false;
    let spectrum = dir.join("spectrum.json");
    if spectrum.exists() {
        found = true;
        let doc = read_json(&spectrum)?;
        let _ = writeln!(out, "Spectrum ({})", spectrum.display());
        for a in doc["atoms"].as_array().into_iter().flatten() {
            let _ = writeln!(out, "  atom lambda={} mass={} count={} residue={}", a["lambda"], a["mass"], a["count"], a["residue"]);
        }
        let _ = writeln!(out, "  residual mass {}", doc["residual"]);
        let _ = writeln!(out, "  window {} (tol {})", doc["window"], doc["config"]["tol"]);
        for w in doc["warnings"].as_array().into_iter().flatten() {
            let _ = writeln!(out, "  warning: {}", w.as_str().unwrap_or_default());
        }
    }
    let clustering = dir.join("clustering.json");
    if clustering.exists() {
        found = true;
        let doc = read_json(&clustering)?;
        let c = &doc["clustering"];
        let _ = writeln!(out, "Clustering ({})", clustering.display());
        let _ = writeln!(out, "  status {}", c["status"]);
        let names: Vec<&str> = c["marks"].as_array().into_iter().flatten().filter_map(|m| m["name"].as_str()).collect();
        let _ = writeln!(out, "  marks {}", names.join(" "));
        if let (Some(indices), Some(measures)) = (c["indices"].as_array(), c["measures"].as_array()) {
            if let (Some(n), Some(row)) = (indices.last(), measures.last().and_then(Value::as_array)) {
                let _ = writeln!(out, "  measures at index {n}:");
                for (name, m) in names.iter().zip(row) {
                    let _ = writeln!(out, "    {name} {m}");
                }
            }
        }
        let _ = writeln!(out, "  violations {}", c["violations"].as_array().map_or(0, Vec::len));
    }
    let verify = dir.join("verify.json");
    if verify.exists() {
        found = true;
        let doc = read_json(&verify)?;
        let _ = writeln!(out, "Verification ({})", verify.display());
        for c in doc["checks"].as_array().into_iter().flatten() {
            let mark = if c["pass"].as_bool() == Some(true) { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "  {mark} {}: {}", c["check"].as_str().unwrap_or_default(), c["detail"].as_str().unwrap_or_default());
        }
    }
    if !found {
        return Err(Error::Input(format!("no spectrum.json, clustering.json or verify.json in {}", dir.display())));
    }
    print!("{out}");
    Ok(true)
}
