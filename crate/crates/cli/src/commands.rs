use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use embed_infolab::covdist::{self, DistanceParams, Metric, SummaryMode};
use embed_infolab::entropy::{self, EmbeddingMatrix, EntropyParams};
use embed_infolab::infogain;
use embed_infolab::plot::{self, csv_field};
use embed_infolab::scaling_sim::{self, SkillWorld};
use embed_infolab::selftest;
use embed_infolab::tensor_io::{self, TensorFile};
use embed_infolab::token_select::{self, AttentionTensor};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::{bad, CliResult, DistancesArgs, EntropyArgs, Flag, InfogainArgs, LassoArgs, PcaArgs, ScalingArgs, SelftestArgs, Sweep};

fn emit(out: Option<&Path>, flag: &'static str, text: &str) -> CliResult<()> {
    match out {
        Some(path) => plot::write_atomic(path, text.as_bytes()).flag(flag),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn read_matrix(path: &Path, flag: &'static str) -> CliResult<DMatrix<f64>> {
    tensor_io::read_tensor(path).and_then(|t| t.to_matrix()).flag(flag)
}

fn embedding(values: DMatrix<f64>, raw: bool, flag: &'static str) -> CliResult<EmbeddingMatrix> {
    let z = EmbeddingMatrix::new(values).flag(flag)?;
    if raw {
        Ok(z)
    } else {
        z.normalize_rows().flag(flag)
    }
}

fn positive(v: f64, flag: &'static str) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(flag, format!("must be a positive number, got {v}")))
    }
}

fn non_negative(v: f64, flag: &'static str) -> CliResult<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(flag, format!("must be >= 0, got {v}")))
    }
}

pub fn entropy(a: EntropyArgs) -> CliResult<()> {
    let p = EntropyParams::new(positive(a.epsilon, "--epsilon")?).flag("--epsilon")?;
    let z = embedding(read_matrix(&a.input, "--input")?, a.raw, "--input")?;
    let h = entropy::logdet_entropy(&z, p);
    let normalized = if z.row_normalized() {
        json!(entropy::normalized_entropy(&z, p).flag("--input")?)
    } else {
        Value::Null
    };
    let out = json!({
        "entropy": h,
        "normalized_entropy": normalized,
        "n": z.n(),
        "d": z.d(),
        "epsilon": a.epsilon,
    });
    emit(a.out.as_deref(), "--out", &json_text(&out))
}

pub fn scaling(a: ScalingArgs) -> CliResult<()> {
    let m = a.m.unwrap_or(if a.sweep == Sweep::Dataset {
        1_000_000_000_000_000
    } else {
        1_000_000
    });
    let w = SkillWorld {
        m,
        alpha: a.alpha,
        b: a.b,
        c: a.c,
        delta: a.delta,
        neurons_per_skill: a.r,
        a_const: a.a,
        gamma_d: a.gamma_d,
    };
    validate_world(&w)?;
    if a.points < 3 {
        return Err(bad("--points", format!("need at least 3 points for a fit, got {}", a.points)));
    }
    let range = |lo: f64, hi: f64| -> CliResult<(f64, f64)> {
        let from = a.from.unwrap_or(lo);
        let to = a.to.unwrap_or(hi);
        positive(from, "--from")?;
        if !(to > from && to.is_finite()) {
            return Err(bad("--to", format!("must exceed --from = {from}, got {to}")));
        }
        Ok((from, to))
    };
    let int_grid = |from: f64, to: f64| -> CliResult<Vec<u64>> {
        let g = scaling_sim::log_grid_u64(from.round().max(1.0) as u64, to.round() as u64, a.points);
        if g.len() < 3 {
            return Err(bad("--to", "range holds fewer than 3 distinct integers"));
        }
        Ok(g)
    };

    let (points, expected): (Vec<(f64, f64)>, f64) = match a.sweep {
        Sweep::Skills => {
            let (from, to) = range(3.0, 300.0)?;
            if to >= m as f64 {
                return Err(bad("--to", format!("skill counts must stay below M = {m}")));
            }
            let ns = int_grid(from, to)?;
            let pts = ns
                .iter()
                .map(|&n| Ok((n as f64, scaling_sim::conditional_entropy_after(&w, n)? - w.c)))
                .collect::<embed_infolab::Result<Vec<_>>>()
                .flag("--sweep")?;
            (pts, -w.alpha)
        }
        Sweep::Parameters => {
            let (from, to) = range(w.neurons_per_skill as f64, 1000.0 * w.neurons_per_skill as f64)?;
            let ns = int_grid(from, to)?;
            let pts = scaling_sim::entropy_vs_parameters(&w, &ns).flag("--from")?;
            (pts.into_iter().map(|(n, h)| (n as f64, h - w.c)).collect(), -w.alpha)
        }
        Sweep::Flops => {
            let lo = scaling_sim::flops_to_comprehend(&w, 1).flag("--sweep")?;
            let hi = scaling_sim::flops_to_comprehend(&w, 1000.min(m)).flag("--sweep")?;
            let (from, to) = range(lo, hi)?;
            let budgets = scaling_sim::log_grid(from, to, a.points);
            let pts = scaling_sim::entropy_vs_flops(&w, &budgets).flag("--from")?;
            (pts.into_iter().map(|(s, h)| (s, h - w.c)).collect(), -w.alpha / (w.alpha + 2.0))
        }
        Sweep::Dataset => {
            let (from, to) = range(1e2, 1e5)?;
            let sizes = scaling_sim::log_grid(from, to, a.points);
            let pts = scaling_sim::entropy_vs_dataset(&w, &sizes).flag("--M")?;
            (pts.into_iter().map(|p| (p.size, p.entropy - w.c)).collect(), 1.0 - 2.0 * w.gamma_d)
        }
    };
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let fit = entropy::fit_power_law(&xs, &ys).flag("--sweep")?;

    fs::create_dir_all(&a.out_dir).flag("--out-dir")?;
    let name = a.sweep.to_string();
    plot::write_atomic(a.out_dir.join(format!("{name}.csv")), plot::xy_csv(&points).as_bytes()).flag("--out-dir")?;
    let summary = json!({
        "sweep": name,
        "x": match a.sweep {
            Sweep::Skills => "skills learned",
            Sweep::Parameters => "parameters",
            Sweep::Flops => "flops",
            Sweep::Dataset => "dataset size",
        },
        "y": "H - C",
        "exponent": fit.exponent,
        "coefficient": fit.coefficient,
        "r_squared": fit.r_squared,
        "expected_exponent": expected,
        "world": w,
    });
    let text = json_text(&summary);
    plot::write_atomic(a.out_dir.join(format!("{name}.json")), text.as_bytes()).flag("--out-dir")?;
    print!("{text}");
    Ok(())
}

fn validate_world(w: &SkillWorld) -> CliResult<()> {
    positive(w.alpha, "--alpha")?;
    positive(w.delta, "--delta")?;
    non_negative(w.c, "--C")?;
    if !(w.b > w.c && w.b.is_finite()) {
        return Err(bad("--B", format!("must exceed --C = {}, got {}", w.c, w.b)));
    }
    if w.m < 2 {
        return Err(bad("--M", format!("need at least 2 skills, got {}", w.m)));
    }
    if w.neurons_per_skill == 0 {
        return Err(bad("--r", "must be >= 1"));
    }
    positive(w.a_const, "--A")?;
    positive(w.gamma_d, "--gamma-d")?;
    w.validate().flag("--alpha")
}

pub fn infogain(a: InfogainArgs) -> CliResult<()> {
    let sigma = positive(a.sigma, "--sigma")?;
    let z = read_matrix(&a.input, "--input")?;
    let curve = infogain::gain_curve(&z, sigma * sigma).flag("--input")?;
    let mut csv = String::from("t,info_gain,normalized_gain,increment,paper_increment,posterior_variance\n");
    for s in &curve {
        writeln!(
            csv,
            "{},{:?},{:?},{:?},{:?},{:?}",
            s.t, s.info_gain, s.normalized_gain, s.increment, s.paper_increment, s.posterior_variance
        )
        .expect("writing to a String");
    }
    emit(a.out.as_deref(), "--out", &csv)
}

fn attention_layer(t: &TensorFile, layer: i64) -> CliResult<(Vec<DMatrix<f64>>, usize)> {
    match t.shape.as_slice() {
        &[_, _, _] => Ok((t.to_matrices().flag("--attention")?, 0)),
        &[layers, heads, rows, cols] => {
            let idx = if layer < 0 { layers as i64 + layer } else { layer };
            if idx < 0 || idx >= layers as i64 {
                return Err(bad("--layer", format!("layer {layer} is outside 0..{layers}")));
            }
            let idx = idx as usize;
            let block = heads * rows * cols;
            let sub = TensorFile::new(
                t.dtype,
                vec![heads, rows, cols],
                t.data[idx * block..(idx + 1) * block].to_vec(),
            )
            .flag("--attention")?;
            Ok((sub.to_matrices().flag("--attention")?, idx))
        }
        other => Err(bad("--attention", format!("expected a 3-D or 4-D tensor, got shape {other:?}"))),
    }
}

pub fn lasso(a: LassoArgs) -> CliResult<()> {
    let lambda = non_negative(a.lambda, "--lambda")?;
    let threshold = non_negative(a.threshold, "--threshold")?;
    let raw = read_matrix(&a.input, "--input")?;
    let n = raw.nrows();
    if n < 2 {
        return Err(bad("--input", format!("need at least 2 tokens, got {n}")));
    }
    let query = a.query.unwrap_or(n - 1);
    if query == 0 || query >= n {
        return Err(bad("--query", format!("must lie in 1..{n}, got {query}")));
    }
    let z = embedding(raw.clone(), a.no_normalize, "--input")?.into_values();
    let reps = z.rows(0, query).transpose();
    let target = z.row(query).transpose();
    let fit = token_select::lasso_fit(&reps, &target, lambda).flag("--lambda")?;
    let lasso_sel = token_select::select_by_threshold(fit.beta.as_slice(), threshold).flag("--threshold")?;

    let mut report = json!({
        "query": query,
        "lambda": lambda,
        "threshold": threshold,
        "normalized": !a.no_normalize,
        "lasso": {
            "selected": lasso_sel.indices,
            "scores": lasso_sel.scores,
            "sweeps": fit.sweeps,
            "kkt_residual": fit.kkt_residual,
            "objective": fit.objective_history.last().copied(),
        },
    });

    let mut attn_sel = None;
    if let Some(path) = &a.attention {
        let t = tensor_io::read_tensor(path).flag("--attention")?;
        let (heads, layer) = attention_layer(&t, a.layer)?;
        let att = AttentionTensor::new(heads, layer).flag("--attention")?;
        if att.seq_len() != n {
            return Err(bad("--attention", format!("covers {} tokens, input has {n}", att.seq_len())));
        }
        let avg = token_select::average_attention(&att);
        let row: Vec<f64> = (0..query).map(|j| avg[(query, j)]).collect();
        let sel = token_select::select_by_threshold(&row, threshold).flag("--threshold")?;
        report["attention"] = json!({
            "layer": layer,
            "selected": sel.indices,
            "scores": sel.scores,
        });
        if let Some(vpath) = &a.values {
            let values = read_matrix(vpath, "--values")?;
            let k = query + 1;
            if values.nrows() != n || values.ncols() != raw.ncols() {
                return Err(bad("--values", format!("expected shape [{n}, {}]", raw.ncols())));
            }
            let u = token_select::attention_unroll_residual(
                &avg.view((0, 0), (k, k)).into_owned(),
                &values.rows(0, k).into_owned(),
                &raw.rows(0, k).into_owned(),
            )
            .flag("--values")?;
            report["unrolling"] = json!({
                "residual_norm": u.residual_norm,
                "correction_norm": u.correction.norm(),
            });
        }
        attn_sel = Some(sel);
    } else if a.values.is_some() {
        return Err(bad("--values", "the unrolling check needs --attention"));
    }

    if let Some(tpath) = &a.tokens {
        let side = tensor_io::read_sidecar(tpath).flag("--tokens")?;
        side.check_against(&TensorFile::from_matrix(&raw)).flag("--tokens")?;
        let empty = token_select::SelectionResult {
            indices: Vec::new(),
            scores: Vec::new(),
            threshold,
        };
        let cmp = token_select::compare_selections(&lasso_sel, attn_sel.as_ref().unwrap_or(&empty), &side, query)
            .flag("--tokens")?;
        report["text"] = json!(cmp.to_text());
        report["comparison"] = serde_json::to_value(&cmp).expect("report serializes");
        println!("{}", cmp.to_text());
    }

    fs::create_dir_all(&a.out_dir).flag("--out-dir")?;
    let mut csv = String::from("index,beta\n");
    for (i, b) in fit.beta.iter().enumerate() {
        writeln!(csv, "{i},{b:?}").expect("writing to a String");
    }
    plot::write_atomic(a.out_dir.join("beta.csv"), csv.as_bytes()).flag("--out-dir")?;
    plot::write_atomic(a.out_dir.join("report.json"), json_text(&report).as_bytes()).flag("--out-dir")
}

/// `(label, matrix)` for every `*.emb1` file in `dir`, ordered by file name.
fn load_dir(dir: &Path, raw: bool) -> CliResult<Vec<(String, EmbeddingMatrix)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .flag("--input-dir")?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "emb1"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(bad("--input-dir", format!("no .emb1 files in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let label = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let m = read_matrix(p, "--input-dir").map_err(|e| bad("--input-dir", format!("{}: {}", p.display(), e.message)))?;
            Ok((label, embedding(m, raw, "--input-dir")?))
        })
        .collect()
}

pub fn distances(a: DistancesArgs) -> CliResult<()> {
    let mode: SummaryMode = a.mode.parse().flag("--mode")?;
    let metric: Metric = match &a.metric {
        Some(m) => m.parse().flag("--metric")?,
        None if mode == SummaryMode::Covariance => Metric::Js,
        None => Metric::L2,
    };
    let gamma = positive(a.gamma, "--gamma")?;
    let items = load_dir(&a.input_dir, a.raw)?;
    let sentences = items
        .iter()
        .map(|(_, z)| covdist::summarize(z, mode, a.center))
        .collect::<embed_infolab::Result<Vec<_>>>()
        .flag("--input-dir")?;
    let dist = covdist::distance_matrix(&sentences, metric, DistanceParams { gamma }).flag("--metric")?;
    let mut csv = String::from("label");
    for (label, _) in &items {
        write!(csv, ",{}", csv_field(label)).expect("writing to a String");
    }
    csv.push('\n');
    for (i, (label, _)) in items.iter().enumerate() {
        csv.push_str(&csv_field(label));
        for j in 0..items.len() {
            write!(csv, ",{:?}", dist[(i, j)]).expect("writing to a String");
        }
        csv.push('\n');
    }
    emit(a.out.as_deref(), "--out", &csv)
}

pub fn pca(a: PcaArgs) -> CliResult<()> {
    let mode: SummaryMode = a.mode.parse().flag("--mode")?;
    if mode == SummaryMode::Covariance {
        return Err(bad("--mode", "PCA needs vector summaries (last or mean)"));
    }
    if a.components == 0 {
        return Err(bad("--components", "must be >= 1"));
    }
    let items = load_dir(&a.input_dir, a.raw)?;
    let vectors = items
        .iter()
        .map(|(_, z)| {
            covdist::summarize(z, mode, false).map(|s| s.as_vector().cloned().expect("vector mode"))
        })
        .collect::<embed_infolab::Result<Vec<DVector<f64>>>>()
        .flag("--input-dir")?;
    let d = vectors[0].len();
    if vectors.iter().any(|v| v.len() != d) {
        return Err(bad("--input-dir", "sentences differ in hidden dimension"));
    }
    let points = DMatrix::from_fn(vectors.len(), d, |i, j| vectors[i][j]);
    let proj = covdist::pca_project(&points, a.components).flag("--components")?;
    let mut csv = String::from("label");
    if a.components == 2 {
        csv.push_str(",x,y");
    } else {
        for c in 1..=a.components {
            write!(csv, ",pc{c}").expect("writing to a String");
        }
    }
    csv.push('\n');
    for (i, (label, _)) in items.iter().enumerate() {
        csv.push_str(&csv_field(label));
        for c in 0..a.components {
            write!(csv, ",{:?}", proj[(i, c)]).expect("writing to a String");
        }
        csv.push('\n');
    }
    emit(a.out.as_deref(), "--out", &csv)
}

pub fn selftest(a: SelftestArgs) -> CliResult<()> {
    let checks = selftest::run(a.seed);
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(out) = &a.out {
        let v = json!({ "seed": a.seed, "checks": checks });
        plot::write_atomic(out, json_text(&v).as_bytes()).flag("--out")?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(bad("selftest", format!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}
