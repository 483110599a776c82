use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use telerisk::featurize::{build_dataset, observable_contracts, LeapMethod, LeapSpec, VinPartition, MAX_LEAP, TELEMATICS_COLUMNS};
use telerisk::forest::{fit_forest, ForestModel, ForestSpec};
use telerisk::linear_models::{fit_penalized_design, glm_importance, GlmModel, PenaltySpec, WarmStart};
use telerisk::recipe::{recipe_fit, FittedRecipe, RecipeConfig};
use telerisk::rng;
use telerisk::study::{
    bootstrap_auc, compare_importance, run_study, Quantiles, Resampler, StudyConfig, StudySummary,
};
use telerisk::synth::generate;
use telerisk::table::{ColumnOrigin, FeatureTable};
use telerisk::trip_store::{assemble_contracts, parse_contracts, parse_trips, VehicleContract, CLASSICAL_COLUMNS};
use telerisk::tuning::{
    auc, bayes_opt_forest, grid_search_glm, BayesOptions, CvPlan, ForestTuning, GridConfig, Hyper, TuneResult,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::Recorder;
use crate::{Cli, Command, ModelKind};

struct Ctx {
    root: PathBuf,
    config: RunConfig,
    config_path: Option<PathBuf>,
}

/// A prepared model with the recipe that feeds it.
#[derive(Serialize, Deserialize)]
struct ModelBundle {
    dataset: String,
    recipe: FittedRecipe,
    model: Model,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Model {
    Glm(GlmModel),
    Forest(ForestModel),
}

#[derive(Serialize)]
struct IngestReport {
    trips_read: usize,
    trips_rejected: usize,
    contracts_read: usize,
    contracts_rejected: usize,
    vehicles: usize,
    vehicles_without_trips: usize,
    vehicles_without_full_year: usize,
    vehicles_unobservable: usize,
    trips_outside_window: usize,
    first_rejections: Vec<String>,
}

#[derive(Serialize)]
struct EvalReport {
    dataset: String,
    model: String,
    test_rows: usize,
    test_auc: f64,
    b: usize,
    redraws: usize,
    quantiles: Quantiles,
}

fn parse_dataset(id: &str) -> Result<LeapSpec, CliError> {
    let bad = || CliError::usage(format!("dataset '{id}' is not of the form D<k>_<TL|DL>"));
    let rest = id.strip_prefix('D').ok_or_else(bad)?;
    let (k, m) = rest.split_once('_').ok_or_else(bad)?;
    let k: u8 = k.parse().map_err(|_| bad())?;
    let method: LeapMethod = m.parse().map_err(|_| bad())?;
    Ok(LeapSpec::new(method, k)?)
}

impl Ctx {
    fn out(&self) -> &Path {
        &self.config.paths.output
    }

    fn abs(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }

    fn ensure_out(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(self.abs(self.out()))?;
        Ok(())
    }

    fn create(&self, rel: &Path) -> Result<BufWriter<File>, CliError> {
        if let Some(parent) = self.abs(rel).parent() {
            std::fs::create_dir_all(parent)?;
        }
        Ok(BufWriter::new(File::create(self.abs(rel))?))
    }

    fn write_json<T: Serialize>(&self, rec: &mut Recorder, rel: &Path, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).expect("serializable");
        std::fs::write(self.abs(rel), text + "\n")?;
        rec.output(rel)
    }

    fn read_json<T: for<'de> Deserialize<'de>>(&self, rec: &mut Recorder, rel: &Path) -> Result<T, CliError> {
        let text = std::fs::read_to_string(self.abs(rel))
            .map_err(|e| CliError::data(format!("cannot read {}: {e}", rel.display())))?;
        rec.input(rel)?;
        Ok(serde_json::from_str(&text)?)
    }

    fn open(&self, rel: &Path) -> Result<File, CliError> {
        File::open(self.abs(rel)).map_err(|e| CliError::data(format!("cannot open {}: {e}", rel.display())))
    }

    fn study_config(&self) -> StudyConfig {
        let s = &self.config.study;
        let mut c = StudyConfig::seeded(self.config.seed);
        c.b = s.b;
        c.delta = s.delta;
        c.train_frac = s.train_frac;
        c.folds = s.folds;
        if let Some(l) = &s.lambdas {
            c.lambdas = l.clone();
        }
        c.recipe.lump_threshold = s.lump_threshold;
        c.recipe.interactions = s.interactions.clone();
        c
    }

    fn recipe(&self) -> RecipeConfig {
        self.study_config().recipe
    }

    fn record_seeds(&self, rec: &mut Recorder) {
        let c = self.study_config();
        rec.seed("master", self.config.seed);
        rec.seed("partition", c.partition_seed);
        rec.seed("cv", c.cv_seed);
        rec.seed("bootstrap", c.bootstrap_seed);
        rec.seed("imputation", c.recipe.bag.seed);
    }

    fn contracts(&self, rec: &mut Recorder) -> Result<(Vec<VehicleContract>, IngestReport), CliError> {
        let p = &self.config.paths;
        let trips = parse_trips(self.open(&p.trips)?)?;
        rec.input(&p.trips)?;
        let rows = parse_contracts(self.open(&p.contracts)?)?;
        rec.input(&p.contracts)?;
        let a = assemble_contracts(&trips.trips, &rows.contracts)?;
        let vehicles = a.contracts.len();
        let (kept, dropped) = observable_contracts(a.contracts);
        if !dropped.is_empty() {
            log::warn!("{} vehicles without observable trips excluded", dropped.len());
        }
        let first_rejections = trips
            .rejected
            .iter()
            .map(|r| format!("trips line {}: {}", r.line, r.message))
            .chain(rows.rejected.iter().map(|r| format!("contracts line {}: {}", r.line, r.message)))
            .take(20)
            .collect();
        let report = IngestReport {
            trips_read: trips.trips.len() + trips.rejected.len(),
            trips_rejected: trips.rejected.len(),
            contracts_read: rows.contracts.len() + rows.rejected.len(),
            contracts_rejected: rows.rejected.len(),
            vehicles,
            vehicles_without_trips: a.no_trip_vins.len(),
            vehicles_without_full_year: a.excluded_vins.len(),
            vehicles_unobservable: dropped.len(),
            trips_outside_window: a.dropped_trips,
            first_rejections,
        };
        if kept.is_empty() {
            return Err(CliError::data("no usable vehicle contracts"));
        }
        Ok((kept, report))
    }

    fn dataset_paths(&self, spec: LeapSpec) -> (PathBuf, PathBuf) {
        let id = spec.id();
        (self.out().join(format!("{id}.csv")), self.out().join(format!("{id}.json")))
    }

    /// The dataset written by `featurize`, or a fresh build when absent.
    fn dataset(&self, rec: &mut Recorder, spec: LeapSpec) -> Result<FeatureTable, CliError> {
        let (csv, side) = self.dataset_paths(spec);
        if self.abs(&csv).exists() && self.abs(&side).exists() {
            let t = FeatureTable::read(self.open(&csv)?, self.open(&side)?)?;
            rec.input(&csv)?;
            rec.input(&side)?;
            return Ok(t);
        }
        let (contracts, _) = self.contracts(rec)?;
        Ok(build_dataset(&contracts, spec)?)
    }

    fn write_table(&self, rec: &mut Recorder, table: &FeatureTable, csv: &Path, side: &Path) -> Result<(), CliError> {
        table.write_csv(self.create(csv)?)?;
        rec.output(csv)?;
        self.write_json(rec, side, &table.sidecar())
    }

    fn split(&self, table: &FeatureTable) -> Result<(FeatureTable, FeatureTable), CliError> {
        let c = self.study_config();
        let p = VinPartition::draw(table.row_ids(), c.train_frac, c.partition_seed)?;
        Ok(p.apply(table))
    }
}

fn origins() -> BTreeMap<String, ColumnOrigin> {
    TELEMATICS_COLUMNS
        .iter()
        .map(|c| (c.to_string(), ColumnOrigin::Telematics))
        .chain(CLASSICAL_COLUMNS.iter().map(|c| (c.to_string(), ColumnOrigin::Classical)))
        .collect()
}

fn glm_hyper(tuned: &TuneResult) -> Option<(f64, f64)> {
    match tuned.best().hyper {
        Hyper::Glm { lambda, alpha } => Some((lambda, alpha)),
        Hyper::Forest { .. } => None,
    }
}

/// Fits the penalized GLM by walking the penalty grid down to `lambda`.
fn fit_glm_path(design: &telerisk::table::Design, lambdas: &[f64], lambda: f64, alpha: f64, c: &StudyConfig) -> Result<GlmModel, CliError> {
    let mut path: Vec<f64> = lambdas.iter().copied().filter(|&l| l > lambda).collect();
    path.sort_by(|a, b| b.total_cmp(a));
    path.push(lambda);
    let mut warm: Option<WarmStart> = None;
    let mut model = None;
    for l in path {
        let m = fit_penalized_design(design, PenaltySpec::new(l, alpha)?, warm.as_ref(), &c.solver)?;
        warm = Some((&m).into());
        model = Some(m);
    }
    Ok(model.expect("path is nonempty"))
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let root = cli.workdir.clone();
    if !root.is_dir() {
        return Err(CliError::usage(format!("workdir {} is not a directory", root.display())));
    }
    let config_path = cli.config.clone();
    let mut config = RunConfig::load(config_path.as_ref().map(|p| root.join(p)).as_deref())?;
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    let ctx = Ctx {
        root,
        config,
        config_path,
    };
    ctx.ensure_out()?;
    let name = match &cli.command {
        Command::Synth { .. } => "synth",
        Command::Ingest => "ingest",
        Command::Featurize { .. } => "featurize",
        Command::Prep { .. } => "prep",
        Command::Tune { .. } => "tune",
        Command::Fit { .. } => "fit",
        Command::Eval { .. } => "eval",
        Command::Study { .. } => "study",
        Command::Report { .. } => "report",
    };
    let mut rec = Recorder::new(&ctx.root, name, ctx.config_path.clone());
    if let Some(p) = &ctx.config_path {
        rec.input(p)?;
    }
    ctx.record_seeds(&mut rec);
    match &cli.command {
        Command::Synth { n_vehicles } => synth(&ctx, &mut rec, *n_vehicles)?,
        Command::Ingest => {
            let (_, report) = ctx.contracts(&mut rec)?;
            rec.lap("ingest");
            ctx.write_json(&mut rec, &ctx.out().join("ingest.json"), &report)?;
        }
        Command::Featurize { method, k } => {
            let method = method.unwrap_or(ctx.config.study.method);
            let (contracts, _) = ctx.contracts(&mut rec)?;
            rec.lap("ingest");
            let ks: Vec<u8> = match k {
                Some(k) => vec![*k],
                None => (0..=MAX_LEAP).collect(),
            };
            for k in ks {
                let spec = LeapSpec::new(method, k)?;
                let table = build_dataset(&contracts, spec)?;
                let (csv, side) = ctx.dataset_paths(spec);
                ctx.write_table(&mut rec, &table, &csv, &side)?;
            }
            rec.lap("featurize");
        }
        Command::Prep { dataset } => {
            let spec = parse_dataset(&dataset.dataset)?;
            let table = ctx.dataset(&mut rec, spec)?;
            let (train, test) = ctx.split(&table)?;
            let recipe = recipe_fit(&train, &ctx.recipe())?;
            rec.lap("fit recipe");
            let id = spec.id();
            ctx.write_json(&mut rec, &ctx.out().join(format!("recipe_{id}.json")), &recipe)?;
            for (part, rows) in [("train", &train), ("test", &test)] {
                let prepped = recipe.apply(rows)?;
                let csv = ctx.out().join(format!("{id}_{part}_prepped.csv"));
                let side = ctx.out().join(format!("{id}_{part}_prepped.json"));
                ctx.write_table(&mut rec, &prepped, &csv, &side)?;
            }
            rec.lap("apply recipe");
        }
        Command::Tune { dataset, model } => {
            let spec = parse_dataset(&dataset.dataset)?;
            let table = ctx.dataset(&mut rec, spec)?;
            let (train, _) = ctx.split(&table)?;
            let c = ctx.study_config();
            let plan = CvPlan::for_table(&train, c.folds, c.cv_seed)?;
            let tuned = match model {
                ModelKind::Glm => grid_search_glm(
                    &train,
                    &GridConfig {
                        lambdas: c.lambdas.clone(),
                        alphas: ctx.config.study.alphas.clone(),
                        recipe: c.recipe.clone(),
                        solver: c.solver,
                    },
                    &plan,
                )?,
                ModelKind::Forest => bayes_opt_forest(&train, &forest_tuning(&ctx, train.n_cols()), &plan)?,
            };
            rec.lap("tune");
            let stem = format!("tune_{}_{}", model.code(), spec.id());
            let csv = ctx.out().join(format!("{stem}.csv"));
            tuned.write_csv(ctx.create(&csv)?)?;
            rec.output(&csv)?;
            ctx.write_json(&mut rec, &ctx.out().join(format!("{stem}.json")), &tuned)?;
        }
        Command::Fit {
            dataset,
            model,
            lambda,
            alpha,
            p_star,
            n_star,
        } => {
            let spec = parse_dataset(&dataset.dataset)?;
            let id = spec.id();
            let table = ctx.dataset(&mut rec, spec)?;
            let (train, _) = ctx.split(&table)?;
            let c = ctx.study_config();
            let tuned_path = ctx.out().join(format!("tune_{}_{id}.json", model.code()));
            let tuned: Option<TuneResult> = if ctx.abs(&tuned_path).exists() {
                Some(ctx.read_json(&mut rec, &tuned_path)?)
            } else {
                None
            };
            let recipe = recipe_fit(&train, &c.recipe)?;
            let prepared = recipe.apply(&train)?;
            let fitted = match model {
                ModelKind::Glm => {
                    let from_tune = tuned.as_ref().and_then(glm_hyper);
                    let lambda = lambda.or(from_tune.map(|h| h.0)).ok_or_else(|| {
                        CliError::usage("fit --model glm needs --lambda or a prior `tune` run")
                    })?;
                    let alpha = alpha.or(from_tune.map(|h| h.1)).unwrap_or(1.0);
                    Model::Glm(fit_glm_path(&prepared.design()?, &c.lambdas, lambda, alpha, &c)?)
                }
                ModelKind::Forest => {
                    let from_tune = tuned.as_ref().and_then(|t| match t.best().hyper {
                        Hyper::Forest { p_star, n_star } => Some((p_star, n_star)),
                        Hyper::Glm { .. } => None,
                    });
                    let p = p_star.or(from_tune.map(|h| h.0));
                    let n = n_star.or(from_tune.map(|h| h.1));
                    let (Some(p), Some(n)) = (p, n) else {
                        return Err(CliError::usage("fit --model forest needs --p-star and --n-star or a prior `tune` run"));
                    };
                    let spec = ForestSpec::new(ctx.config.forest.n_trees, p, n, rng::derive(ctx.config.seed, 5));
                    Model::Forest(fit_forest(&prepared, &spec)?)
                }
            };
            rec.lap("fit");
            let bundle = ModelBundle {
                dataset: id.clone(),
                recipe,
                model: fitted,
            };
            ctx.write_json(&mut rec, &ctx.out().join(format!("model_{}_{id}.json", model.code())), &bundle)?;
        }
        Command::Eval { dataset, model, b } => {
            let spec = parse_dataset(&dataset.dataset)?;
            let id = spec.id();
            let bundle: ModelBundle = ctx.read_json(&mut rec, &ctx.out().join(format!("model_{}_{id}.json", model.code())))?;
            let table = ctx.dataset(&mut rec, spec)?;
            let (_, test) = ctx.split(&table)?;
            let design = bundle.recipe.apply(&test)?.design()?;
            let scores = match &bundle.model {
                Model::Glm(m) => m.predict_design(&design)?,
                Model::Forest(m) => m.predict_design(&design)?,
            };
            let test_auc = auc(&scores, test.response())?;
            let c = ctx.study_config();
            let b = b.unwrap_or(c.b);
            let boot = bootstrap_auc(&scores, test.response(), b, Resampler::Random { seed: c.bootstrap_seed })?;
            rec.lap("evaluate");
            let stem = format!("eval_{}_{id}", model.code());
            let csv = ctx.out().join(format!("{stem}_replicates.csv"));
            {
                let mut w = ctx.create(&csv)?;
                use std::io::Write;
                writeln!(w, "replicate_index,auc")?;
                for (i, a) in boot.replicates.iter().enumerate() {
                    writeln!(w, "{i},{a}")?;
                }
                w.flush()?;
            }
            rec.output(&csv)?;
            let mut v = boot.replicates.clone();
            v.sort_by(f64::total_cmp);
            let q = |p: f64| telerisk::stats::quantile_sorted(&v, p);
            let report = EvalReport {
                dataset: id,
                model: model.code().into(),
                test_rows: test.n_rows(),
                test_auc,
                b,
                redraws: boot.redraws,
                quantiles: Quantiles {
                    min: v[0],
                    q1: q(0.25),
                    median: q(0.5),
                    q3: q(0.75),
                    max: v[v.len() - 1],
                },
            };
            ctx.write_json(&mut rec, &ctx.out().join(format!("{stem}.json")), &report)?;
        }
        Command::Study { method, b, delta } => {
            let method = method.unwrap_or(ctx.config.study.method);
            let (contracts, _) = ctx.contracts(&mut rec)?;
            rec.lap("ingest");
            let mut c = ctx.study_config();
            if let Some(b) = b {
                c.b = *b;
            }
            if let Some(d) = delta {
                c.delta = *d;
            }
            let result = run_study(&contracts, method, &c)?;
            rec.lap("study");
            let m = method.code();
            let out = ctx.out();
            let csv = out.join(format!("study_{m}_replicates.csv"));
            result.write_replicates_csv(ctx.create(&csv)?)?;
            rec.output(&csv)?;
            ctx.write_json(&mut rec, &out.join(format!("study_{m}_summary.json")), &result.summary())?;
            let models: BTreeMap<String, &GlmModel> =
                result.distributions.iter().map(|d| (d.spec.id(), &d.model)).collect();
            ctx.write_json(&mut rec, &out.join(format!("study_{m}_models.json")), &models)?;
            let tuning = out.join(format!("study_{m}_tuning.csv"));
            {
                let mut w = ctx.create(&tuning)?;
                use std::io::Write;
                writeln!(w, "dataset,lambda,mean_auc,sd_auc,selected")?;
                for (d, t) in result.distributions.iter().zip(&result.tuning) {
                    for (i, cand) in t.candidates.iter().enumerate() {
                        if let Hyper::Glm { lambda, .. } = cand.hyper {
                            writeln!(w, "{},{lambda},{},{},{}", d.spec.id(), cand.mean_auc, cand.sd_auc, i == t.selected)?;
                        }
                    }
                }
                w.flush()?;
            }
            rec.output(&tuning)?;
        }
        Command::Report { method } => report(&ctx, &mut rec, method.unwrap_or(ctx.config.study.method))?,
    }
    rec.lap("write");
    let path = rec.finish(ctx.out())?;
    log::info!("manifest written to {}", path.display());
    Ok(())
}

fn forest_tuning(ctx: &Ctx, n_cols: usize) -> ForestTuning {
    let f = &ctx.config.forest;
    ForestTuning {
        n_trees: f.n_trees,
        p_star: (f.p_star.0.max(1), f.p_star.1.min(n_cols.max(1))),
        n_star: f.n_star,
        budget: f.budget,
        bayes: BayesOptions {
            n_initial: f.n_initial,
            n_iter: f.budget.saturating_sub(f.n_initial),
            seed: rng::derive(ctx.config.seed, 6),
            ..BayesOptions::default()
        },
        recipe: ctx.recipe(),
        forest_seed: rng::derive(ctx.config.seed, 5),
    }
}

fn synth(ctx: &Ctx, rec: &mut Recorder, n_vehicles: Option<usize>) -> Result<(), CliError> {
    let mut g = ctx.config.synth.clone();
    g.seed = ctx.config.seed;
    if let Some(n) = n_vehicles {
        g.n_vehicles = n;
    }
    rec.seed("synth", g.seed);
    let fleet = generate(&g)?;
    rec.lap("generate");
    let p = &ctx.config.paths;
    fleet.write_csv(ctx.create(&p.trips)?, ctx.create(&p.contracts)?)?;
    rec.output(&p.trips)?;
    rec.output(&p.contracts)?;
    let truth = ctx.out().join("synth_truth.csv");
    {
        use std::io::Write;
        let mut w = ctx.create(&truth)?;
        writeln!(w, "vin,class,claim_probability")?;
        for t in &fleet.truth {
            writeln!(w, "{},{},{}", t.vin.as_str(), t.class, t.claim_probability)?;
        }
        w.flush()?;
    }
    rec.output(&truth)?;
    log::info!("{} vehicles, {} trips, claim rate {:.4}", fleet.contracts.len(), fleet.trips.len(), fleet.claim_rate());
    Ok(())
}

fn report(ctx: &Ctx, rec: &mut Recorder, method: LeapMethod) -> Result<(), CliError> {
    use std::io::Write;
    let m = method.code();
    let out = ctx.out();
    let summary: StudySummary = ctx.read_json(rec, &out.join(format!("study_{m}_summary.json")))?;
    let models: BTreeMap<String, GlmModel> = ctx.read_json(rec, &out.join(format!("study_{m}_models.json")))?;

    let box_path = out.join(format!("report_{m}_boxplot.csv"));
    {
        let mut w = ctx.create(&box_path)?;
        writeln!(w, "k,dataset,min,q1,median,q3,max,point_auc,redundancy_point")?;
        for d in &summary.datasets {
            let q = d.quantiles;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                d.k,
                d.id,
                q.min,
                q.q1,
                q.median,
                q.q3,
                q.max,
                d.point_auc,
                d.k as usize == summary.redundancy_point
            )?;
        }
        w.flush()?;
    }
    rec.output(&box_path)?;

    // importance across the telematics datasets, ranked per model
    let mut labelled: Vec<(u8, String, Vec<(String, f64)>)> = summary
        .datasets
        .iter()
        .filter(|d| d.k > 0)
        .filter_map(|d| models.get(&d.id).map(|g| (d.k, d.id.clone(), glm_importance(g))))
        .collect();
    labelled.sort_by_key(|x| x.0);
    let pairs: Vec<(String, Vec<(String, f64)>)> = labelled.into_iter().map(|(_, id, v)| (id, v)).collect();
    let cmp = compare_importance(&pairs, &origins());
    let imp_path = out.join(format!("report_{m}_importance.csv"));
    {
        let mut w = ctx.create(&imp_path)?;
        let header: Vec<String> = cmp.models.iter().map(|id| format!("rank_{id}")).collect();
        writeln!(w, "column,origin,mean_rank,{}", header.join(","))?;
        let origins = origins();
        let mut rows: Vec<(&String, &Vec<f64>)> = cmp.ranks.iter().collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        rows.sort_by(|a, b| mean(a.1).total_cmp(&mean(b.1)).then_with(|| a.0.cmp(b.0)));
        for (col, ranks) in rows {
            let origin = match origins.get(col) {
                Some(ColumnOrigin::Telematics) => "telematics",
                Some(ColumnOrigin::Classical) => "classical",
                _ => "interaction",
            };
            let rs: Vec<String> = ranks.iter().map(f64::to_string).collect();
            writeln!(w, "{col},{origin},{},{}", mean(ranks), rs.join(","))?;
        }
        w.flush()?;
    }
    rec.output(&imp_path)?;

    let tab_path = out.join(format!("report_{m}_tuning.csv"));
    {
        let mut w = ctx.create(&tab_path)?;
        writeln!(w, "dataset,model,hyperparameters,cv_auc,test_auc,nonzero")?;
        for d in &summary.datasets {
            writeln!(w, "{},lasso,lambda={},{},{},{}", d.id, d.lambda, d.cv_auc, d.point_auc, d.nonzero)?;
        }
        for entry in std::fs::read_dir(ctx.abs(out))? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if !(name.starts_with("eval_") && name.ends_with(".json")) {
                continue;
            }
            let rel = out.join(&name);
            let v: serde_json::Value = ctx.read_json(rec, &rel)?;
            writeln!(
                w,
                "{},{},from {},,{},",
                v["dataset"].as_str().unwrap_or(""),
                v["model"].as_str().unwrap_or(""),
                name,
                v["test_auc"]
            )?;
        }
        w.flush()?;
    }
    rec.output(&tab_path)?;
    let origin_path = out.join(format!("report_{m}_origins.json"));
    ctx.write_json(rec, &origin_path, &cmp.origin_mean_rank)?;
    Ok(())
}
