use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use fourier_shap::gp::{
    feature_matrix, finite_width_bound, finite_width_epsilon, high_probability_bound, monte_carlo_gaps,
    shap_weights_sq_sum, write_bound_report, Activation, BoundRow, GaussianSampler, KernelOperator,
    KernelSource, KernelSpec, KlSampler, Nonlinearity, RandomFeatureNetwork, TailStatistics,
};
use fourier_shap::pipeline::{
    bin_rows, fit_coefficients, logit, per_bin_report, select_atoms, write_bench_csv, BenchConfig, BinSplit,
    BinningScheme, MlpPredictor, MlpWeights, SelectionConfig,
};
use fourier_shap::shap::write_attributions_csv;
use fourier_shap::{
    brute_force_shap, forward_transform_with_limit, fourier_shap, kernel_shap, load_model, truncation_bound,
    write_model, Attribution, DensePredictor, Error, KernelShapConfig, MeasureSpec, MultiIndex, Predictor,
    ProductMeasure, Result, Selector, SparseFourierModel, TensorBasis, BASIS_CONVENTION, DEFAULT_DENSE_LIMIT,
};
use log::info;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::manifest::RunClock;
use crate::{
    BaselineArg, BasisArgs, BenchArgs, BoundsArgs, Command, GpSampleArgs, MethodArg, PipelineArgs, ShapArgs,
    TransformArgs, TruncateArgs,
};

/// One primary output, written only after every input has been validated.
struct Artifact {
    path: Option<PathBuf>,
    bytes: Vec<u8>,
}

#[derive(Default)]
struct Outcome {
    artifacts: Vec<Artifact>,
    summary: BTreeMap<String, Value>,
    /// Directory created before writing artifacts.
    dir: Option<PathBuf>,
    /// Manifest location when `--manifest` is absent.
    default_manifest: Option<PathBuf>,
}

impl Outcome {
    fn single(path: Option<&Path>, bytes: Vec<u8>) -> Self {
        Outcome {
            default_manifest: path.map(manifest_beside),
            artifacts: vec![Artifact {
                path: path.map(Path::to_path_buf),
                bytes,
            }],
            ..Outcome::default()
        }
    }

    fn note(mut self, key: &str, value: Value) -> Self {
        self.summary.insert(key.to_string(), value);
        self
    }
}

fn manifest_beside(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    path.with_file_name(name)
}

pub fn run(command: &Command, manifest: Option<&Path>) -> Result<()> {
    let clock = RunClock::start(command)?;
    let outcome = match command {
        Command::Basis(a) => basis(a)?,
        Command::Transform(a) => transform(a)?,
        Command::Truncate(a) => truncate(a)?,
        Command::Shap(a) => shap(a)?,
        Command::Bounds(a) => bounds(a)?,
        Command::GpSample(a) => gp_sample(a)?,
        Command::Pipeline(a) => pipeline(a)?,
        Command::Bench(a) => bench(a)?,
    };
    if let Some(dir) = &outcome.dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut written = Vec::new();
    for a in &outcome.artifacts {
        match &a.path {
            Some(p) => {
                std::fs::write(p, &a.bytes)?;
                written.push(p.display().to_string());
            }
            None => {
                use std::io::Write;
                std::io::stdout().write_all(&a.bytes)?;
                written.push("-".to_string());
            }
        }
    }
    if let Some(path) = manifest.map(Path::to_path_buf).or(outcome.default_manifest) {
        clock.finish(written, outcome.summary)?.write(&path)?;
    }
    Ok(())
}

fn parse_state(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::Parameter(format!("cannot parse instance `{text}`")))
        })
        .collect()
}

fn read_instances(path: &Path) -> Result<Vec<Vec<usize>>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
    reader
        .records()
        .map(|r| {
            let r = r?;
            r.iter()
                .map(|v| v.parse().map_err(|_| Error::Data(format!("bad state index `{v}` in {}", path.display()))))
                .collect()
        })
        .collect()
}

fn require_seed(seed: Option<u64>, why: &str) -> Result<u64> {
    seed.ok_or_else(|| Error::Parameter(format!("--seed is required {why}")))
}

fn json_bytes(value: &impl serde::Serialize) -> Result<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text.into_bytes())
}

fn model_bytes(model: &SparseFourierModel) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_model(model, &mut buf)?;
    Ok(buf)
}

fn basis(a: &BasisArgs) -> Result<Outcome> {
    let mu = MeasureSpec::load(&a.measure)?;
    let basis = TensorBasis::new(mu.clone())?;
    let features: Vec<Value> = basis
        .coordinates()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            json!({
                "cardinality": c.cardinality(),
                "probs": mu.marginal(i),
                "psi": c.rows(),
                "gram_error": c.gram_error(mu.marginal(i)),
            })
        })
        .collect();
    let doc = json!({
        "convention": BASIS_CONVENTION,
        "measure_hash": mu.hash(),
        "features": features,
    });
    Ok(Outcome::single(a.out.as_deref(), json_bytes(&doc)?))
}

fn read_value_column(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let col = reader
        .headers()?
        .iter()
        .position(|h| h == "value")
        .ok_or_else(|| Error::Schema(format!("{} has no `value` column", path.display())))?;
    reader
        .records()
        .map(|r| {
            let r = r?;
            let v = r.get(col).unwrap_or("");
            match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(Error::Data(format!("bad value `{v}` in {}", path.display()))),
            }
        })
        .collect()
}

fn check_mlp_space(weights: &MlpWeights, mu: &ProductMeasure) -> Result<()> {
    if weights.cardinalities != mu.space().cardinalities() {
        return Err(Error::Dimension(format!(
            "network cardinalities {:?} differ from the measure's {:?}",
            weights.cardinalities,
            mu.space().cardinalities()
        )));
    }
    Ok(())
}

fn tabulate_mlp(weights: MlpWeights, limit: usize) -> Result<DensePredictor> {
    let table = DensePredictor::materialize(&MlpPredictor::new(weights)?, limit)?;
    if table.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("network logit is not finite on some state".into()));
    }
    Ok(table)
}

fn transform(a: &TransformArgs) -> Result<Outcome> {
    let mu = MeasureSpec::load(&a.measure)?;
    let basis = Arc::new(TensorBasis::new(mu.clone())?);
    let space = basis.space().clone();
    space.dense_len(a.dense_limit)?;
    let table = match (&a.values, &a.mlp) {
        (Some(path), _) => DensePredictor::new(space, read_value_column(path)?)?,
        (None, Some(path)) => {
            let w = MlpWeights::load(path)?;
            check_mlp_space(&w, &mu)?;
            tabulate_mlp(w, a.dense_limit)?
        }
        (None, None) => return Err(Error::Parameter("one of --values or --mlp is required".into())),
    };
    let model = forward_transform_with_limit(&table, &basis, a.dense_limit)?;
    info!("{} nonzero coefficients", model.len());
    Ok(Outcome::single(a.out.as_deref(), model_bytes(&model)?)
        .note("entries", json!(model.len()))
        .note("interaction_order", json!(model.interaction_order())))
}

fn truncate(a: &TruncateArgs) -> Result<Outcome> {
    let selector: Selector = a.selector.parse()?;
    let model = load_model(&a.model)?;
    let (kept, residual) = model.truncate(&selector);
    Ok(Outcome::single(a.out.as_deref(), model_bytes(&kept)?)
        .note("entries_before", json!(model.len()))
        .note("entries_after", json!(kept.len()))
        .note("residual_norm", json!(residual)))
}

fn shap(a: &ShapArgs) -> Result<Outcome> {
    let model = load_model(&a.model)?;
    let space = model.feature_space().clone();
    let mut instances: Vec<Vec<usize>> = a.instance.iter().map(|s| parse_state(s)).collect::<Result<_>>()?;
    if let Some(path) = &a.instances {
        instances.extend(read_instances(path)?);
    }
    if instances.is_empty() {
        return Err(Error::Parameter("give at least one --instance or --instances".into()));
    }
    for x in &instances {
        space.check_state(x)?;
    }
    let seed = match a.method {
        MethodArg::Kernel => require_seed(a.seed, "for --method kernel")?,
        _ => a.seed.unwrap_or(0),
    };
    if !(a.efficiency_tol >= 0.0) {
        return Err(Error::Parameter("--efficiency-tol must be ≥ 0".into()));
    }
    let names: Option<Vec<String>> = a
        .feature_names
        .as_ref()
        .map(|s| s.split(',').map(|v| v.trim().to_string()).collect());
    if names.as_ref().is_some_and(|v| v.len() != space.n()) {
        return Err(Error::Parameter(format!("--feature-names needs {} names", space.n())));
    }
    let selector: Option<Selector> = a.selector.as_deref().map(str::parse).transpose()?;
    let target = match &selector {
        Some(s) => model.truncate(s).0,
        None => model.clone(),
    };
    let mu = model.basis().measure();
    let config = KernelShapConfig { budget: a.budget, seed };

    let attributions: Vec<Attribution> = instances
        .par_iter()
        .map(|x| match a.method {
            MethodArg::Fourier => fourier_shap(&target, x),
            MethodArg::Brute => brute_force_shap(&target, x, mu),
            MethodArg::Kernel => kernel_shap(&target, x, mu, &config),
        })
        .collect::<Result<_>>()?;
    let worst = attributions.iter().map(Attribution::efficiency_gap).fold(0.0, f64::max);
    if worst > a.efficiency_tol {
        return Err(Error::Numeric(format!(
            "efficiency check failed: |base + Σφ − h(x*)| = {worst:e} > {:e}",
            a.efficiency_tol
        )));
    }
    let bounds: Option<Vec<Vec<f64>>> = match &selector {
        Some(s) => Some(
            instances
                .par_iter()
                .map(|x| (0..space.n()).map(|i| truncation_bound(&model, s, i, x)).collect())
                .collect::<Result<_>>()?,
        ),
        None => None,
    };
    let mut buf = Vec::new();
    write_attributions_csv(&attributions, names.as_deref(), bounds.as_deref(), &mut buf)?;
    Ok(Outcome::single(a.out.as_deref(), buf)
        .note("instances", json!(instances.len()))
        .note("max_efficiency_gap", json!(worst)))
}

fn nonlinearity(activation: &Activation) -> Nonlinearity {
    match activation {
        Activation::Relu => Nonlinearity::Relu,
        Activation::Erf => Nonlinearity::Erf,
        Activation::MonteCarlo { nonlinearity, .. } => *nonlinearity,
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn bounds(a: &BoundsArgs) -> Result<Outcome> {
    let selector: Selector = a.selector.parse()?;
    let x = parse_state(&a.instance)?;
    if let Some(&d) = a.delta.iter().find(|&&d| !(d > 0.0 && d < 1.0)) {
        return Err(Error::Parameter(format!("δ = {d} is outside (0, 1)")));
    }
    if a.width == Some(0) {
        return Err(Error::Parameter("--width must be at least 1".into()));
    }
    let seed = if a.mc_samples > 0 || a.width.is_some() {
        require_seed(a.seed, "with --mc-samples or --width")?
    } else {
        0
    };
    let spec = KernelSpec::load(&a.kernel)?;
    let nngp = match (&spec.kernel, a.width) {
        (KernelSource::Nngp(src), Some(_)) => Some(src.clone()),
        (_, Some(_)) => return Err(Error::Parameter("--width needs an NNGP kernel".into())),
        _ => None,
    };
    let op = spec.build()?;
    let basis = op.basis().clone();
    let space = basis.space().clone();
    space.check_state(&x)?;
    let tail = TailStatistics::new(&op, &selector)?;

    // the finite-width network shares the NNGP tail set
    let network = match (&nngp, a.width) {
        (Some(src), Some(width)) => {
            let f = feature_matrix(&space, src.encoding, DEFAULT_DENSE_LIMIT)?;
            let net = RandomFeatureNetwork::sample(
                &f,
                src.depth,
                width,
                nonlinearity(&src.activation),
                src.sigma_w2,
                src.sigma_b2,
                seed,
            )?;
            let eps = finite_width_epsilon(&net, &op.matrix()?, basis.measure())?;
            let mask = op.tail_mask(&selector)?;
            let kept = Selector::explicit(
                mask.iter()
                    .enumerate()
                    .filter(|(_, &t)| !t)
                    .map(|(j, _)| MultiIndex(space.decode(j))),
            );
            let finite = KernelOperator::from_matrix(basis.clone(), net.covariance())?;
            Some((eps, kept, finite))
        }
        _ => None,
    };

    let mut rows = Vec::new();
    for i in 0..space.n() {
        let wss = shap_weights_sq_sum(&op, &selector, i, &x)?;
        let gaps = if a.mc_samples > 0 {
            let mut g = monte_carlo_gaps(&op, &selector, i, &x, a.mc_samples, seed.wrapping_add(i as u64))?;
            g.sort_by(f64::total_cmp);
            Some(g)
        } else {
            None
        };
        let expected = wss.sqrt() * tail.sigma1.sqrt();
        rows.push(BoundRow {
            bound_type: "expected".into(),
            feature: i,
            delta: None,
            value: expected,
            mc_estimate: gaps.as_deref().map(mean),
            violation_rate: None,
        });
        for &delta in &a.delta {
            let value = high_probability_bound(&tail, wss, delta)?;
            let (quantile, rate) = match &gaps {
                Some(g) => {
                    let q = g[(((1.0 - delta) * g.len() as f64).ceil() as usize).clamp(1, g.len()) - 1];
                    let over = g.iter().filter(|&&v| v > value).count();
                    (Some(q), Some(over as f64 / g.len() as f64))
                }
                None => (None, None),
            };
            rows.push(BoundRow {
                bound_type: "high_probability".into(),
                feature: i,
                delta: Some(delta),
                value,
                mc_estimate: quantile,
                violation_rate: rate,
            });
        }
        if let Some((eps, kept, finite)) = &network {
            let value = finite_width_bound(wss, tail.sigma1, *eps)?;
            let estimate = if a.mc_samples > 0 {
                let g = monte_carlo_gaps(finite, kept, i, &x, a.mc_samples, seed.wrapping_add(1 << 32).wrapping_add(i as u64))?;
                Some(mean(&g))
            } else {
                None
            };
            rows.push(BoundRow {
                bound_type: "finite_width".into(),
                feature: i,
                delta: None,
                value,
                mc_estimate: estimate,
                violation_rate: None,
            });
        }
    }
    let mut buf = Vec::new();
    write_bound_report(&rows, &mut buf)?;
    let mut out = Outcome::single(a.out.as_deref(), buf)
        .note("sigma1", json!(tail.sigma1))
        .note("sigma2", json!(tail.sigma2))
        .note("s_max", json!(tail.s_max))
        .note("diagonal", json!(op.is_diagonal()));
    if let Some((eps, _, _)) = &network {
        out = out.note("epsilon_n", json!(eps));
    }
    Ok(out)
}

fn gp_sample(a: &GpSampleArgs) -> Result<Outcome> {
    if a.count == 0 {
        return Err(Error::Parameter("--count must be at least 1".into()));
    }
    let op = KernelSpec::load(&a.kernel)?.build()?;
    let space = op.basis().space().clone();
    let len = space.dense_len(DEFAULT_DENSE_LIMIT)?;
    let draws: Vec<Vec<f64>> = if op.is_diagonal() {
        let mut s = KlSampler::new(&op, a.seed)?;
        (0..a.count).map(|_| s.draw()).collect()
    } else {
        let mut s = GaussianSampler::new(&op.matrix()?, a.seed)?;
        (0..a.count).map(|_| s.draw()).collect()
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["sample".to_string()];
    header.extend((0..space.n()).map(|i| format!("x{i}")));
    header.push("value".into());
    w.write_record(&header)?;
    for (s, values) in draws.iter().enumerate() {
        for (j, v) in values.iter().enumerate().take(len) {
            let mut rec = vec![s.to_string()];
            rec.extend(space.decode(j).iter().map(|v| v.to_string()));
            rec.push(fourier_shap::format_f64(*v));
            w.write_record(&rec)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(Outcome::single(a.out.as_deref(), bytes).note("method", json!(if op.is_diagonal() { "karhunen_loeve" } else { "cholesky" })))
}

/// Marginals of the binned rows with one pseudo-count per state.
fn smoothed_marginals(space: &fourier_shap::FeatureSpace, rows: &[Vec<usize>]) -> Result<ProductMeasure> {
    let probs = (0..space.n())
        .map(|i| {
            let mut counts = vec![1.0; space.cardinality(i)];
            for x in rows {
                counts[x[i]] += 1.0;
            }
            let total: f64 = counts.iter().sum();
            counts.into_iter().map(|c| c / total).collect()
        })
        .collect();
    ProductMeasure::new(probs)
}

fn pipeline(a: &PipelineArgs) -> Result<Outcome> {
    let mut scheme = match &a.schema {
        Some(p) => BinningScheme::load(p)?,
        None => BinningScheme::stroke(),
    };
    if let Some(col) = &a.prediction_column {
        scheme.prediction = Some(col.clone());
    }
    let mlp = a.mlp.as_ref().map(MlpWeights::load).transpose()?;
    if mlp.is_none() && scheme.prediction.is_none() {
        return Err(Error::Parameter("targets need --mlp or a prediction column".into()));
    }
    let split = scheme
        .split
        .clone()
        .ok_or_else(|| Error::Schema("per-bin reports need a split column in the schema".into()))?;
    let config = SelectionConfig {
        k1: a.k1,
        k2: a.k2,
        k3: a.k3,
        d_max: a.d_max,
        per_feature_top: a.per_feature_top,
    };
    let file = std::fs::File::open(&a.data)?;
    let data = bin_rows(std::io::BufReader::new(file), &scheme)?;
    if data.is_empty() {
        return Err(Error::Data("no rows survived binning".into()));
    }
    info!("{} rows binned, {} rejected", data.len(), data.rejected.len());

    let mu = smoothed_marginals(&data.space, &data.states)?;
    let basis = Arc::new(TensorBasis::new(mu.clone())?);
    let baseline: Option<DensePredictor> = match mlp {
        Some(w) => {
            check_mlp_space(&w, &mu)?;
            Some(tabulate_mlp(w, DEFAULT_DENSE_LIMIT)?)
        }
        None => None,
    };
    let targets: Vec<f64> = match (&baseline, &data.predictions) {
        (Some(table), _) => data.states.iter().map(|x| table.value(x)).collect(),
        (None, Some(p)) => p.iter().map(|&p| logit(p)).collect(),
        (None, None) => unreachable!("checked above"),
    };
    let selection = select_atoms(&basis, &data.states, &targets, &config)?;
    let model = fit_coefficients(basis.clone(), selection.atoms(), &data.states, &targets, None, a.ridge)?;
    let surrogate;
    let kernel_target: &dyn Predictor = match &baseline {
        Some(t) => t,
        None => {
            surrogate = model.to_dense(DEFAULT_DENSE_LIMIT)?;
            &surrogate
        }
    };

    let bins = data.split.as_ref().expect("scheme has a split column");
    let mut taken = vec![0usize; split.cardinality()];
    let mut chosen = Vec::new();
    for (r, &b) in bins.iter().enumerate() {
        if a.max_per_bin.is_none_or(|cap| taken[b] < cap) {
            taken[b] += 1;
            chosen.push(r);
        }
    }
    let instances: Vec<Vec<usize>> = chosen.iter().map(|&r| data.states[r].clone()).collect();
    let chosen_bins: Vec<usize> = chosen.iter().map(|&r| bins[r]).collect();
    let report = per_bin_report(
        &instances,
        &BinSplit {
            bins: &chosen_bins,
            labels: &data.split_labels,
        },
        &data.feature_names,
        &model,
        kernel_target,
        &mu,
        &KernelShapConfig {
            budget: a.kernel_budget,
            seed: a.seed,
        },
    )?;

    let mut binned = Vec::new();
    data.write_csv(&scheme, &mut binned)?;
    let mut rejected = csv::Writer::from_writer(Vec::new());
    for r in &data.rejected {
        rejected.serialize(r)?;
    }
    let rejected = rejected.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let mut report_csv = Vec::new();
    report.write_csv(&mut report_csv)?;
    let dir = a.out_dir.clone();
    let artifact = |name: &str, bytes| Artifact {
        path: Some(dir.join(name)),
        bytes,
    };
    Ok(Outcome {
        artifacts: vec![
            artifact("binned.csv", binned),
            artifact("rejected.csv", rejected),
            artifact("selection.json", json_bytes(&selection)?),
            artifact("model.jsonl", model_bytes(&model)?),
            artifact("per_bin_report.csv", report_csv),
        ],
        summary: BTreeMap::new(),
        default_manifest: Some(dir.join("manifest.json")),
        dir: Some(dir),
    }
    .note("rows", json!(data.len()))
    .note("rejected", json!(data.rejected.len()))
    .note("atoms", json!(model.len()))
    .note("explained", json!(instances.len()))
    .note("max_additivity_gap", json!(report.max_additivity_gap)))
}

fn bench(a: &BenchArgs) -> Result<Outcome> {
    if a.instances == 0 {
        return Err(Error::Parameter("--instances must be at least 1".into()));
    }
    let model = load_model(&a.model)?;
    let mu = model.basis().measure().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let samplers: Vec<WeightedIndex<f64>> = mu
        .marginals()
        .iter()
        .map(|p| WeightedIndex::new(p).map_err(|e| Error::Data(e.to_string())))
        .collect::<Result<_>>()?;
    let instances: Vec<Vec<usize>> = (0..a.instances)
        .map(|_| samplers.iter().map(|s| s.sample(&mut rng)).collect())
        .collect();
    let config = BenchConfig {
        warmup: a.warmup,
        reps: a.reps,
        kernel_budget: a.kernel_budget,
        seed: a.seed,
    };
    let dense;
    let baseline: &dyn Predictor = match a.baseline {
        BaselineArg::Sparse => &model,
        BaselineArg::Dense => {
            dense = model.to_dense(DEFAULT_DENSE_LIMIT)?;
            &dense
        }
    };
    let rows = fourier_shap::benchmark(&model, baseline, &mu, &instances, &config)?;
    let mut buf = Vec::new();
    write_bench_csv(&rows, &mut buf)?;
    Ok(Outcome::single(a.out.as_deref(), buf).note("speedup", json!(rows[0].speedup)))
}
