//! Command implementations: load config, apply flag overrides, run the
//! pipeline stage, write outputs under the fixed filenames.

use crate::{Cli, Command, FitScope, ModeArg};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};
use vibestep::dpmm::{AssignmentMode, DpmmModel};
use vibestep::error::{Error, Result};
use vibestep::features::FeatureSpec;
use vibestep::fisher::{FisherTransform, StoredFisherTransform};
use vibestep::io::{load_features, save_features};
use vibestep::manifest::{load_dataset, Dataset, ImpulseKind};
use vibestep::pipeline::{
    self, all_features, decompose_located, evaluate_dataset, extract_dataset, identify_features,
    run_online, PipelineConfig,
};
use vibestep::scenario::{build_dataset, write_dataset};
use vibestep::types::{FeatureVector, GroupingMode};

/// Wall-clock metadata, kept out of the deterministic reports so those
/// stay byte-identical across runs (run_meta.json).
#[derive(Debug, Serialize)]
struct RunMeta {
    command: String,
    started_unix_s: f64,
    duration_s: f64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn ensure_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(io_err(out))
}

fn load_config(path: &Option<PathBuf>) -> Result<PipelineConfig> {
    match path {
        Some(p) => pipeline::load_json(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn manifest_path(out: &Path, dataset: &Option<PathBuf>) -> PathBuf {
    dataset
        .clone()
        .unwrap_or_else(|| out.join("manifest.json"))
}

/// Resolve the extraction/modeling spec for a dataset-backed command:
/// config override beats the manifest spec, then command-line switches
/// beat both (flags win).
fn spec_of(
    dataset: &Dataset,
    config: &PipelineConfig,
    flags: SpecFlags,
    detection_sigma: Option<f64>,
) -> Result<FeatureSpec> {
    let mut spec = config
        .features
        .clone()
        .unwrap_or_else(|| dataset.manifest.feature_spec.clone());
    flags.apply(&mut spec);
    if let Some(sigma) = detection_sigma {
        spec.detection_threshold_sigma = sigma;
    }
    spec.validate()?;
    Ok(spec)
}

/// Global modeling-space switches; presence turns a flag on.
#[derive(Clone, Copy)]
struct SpecFlags {
    log_amplitude: bool,
    l2_normalize: bool,
}

impl SpecFlags {
    fn apply(self, spec: &mut FeatureSpec) {
        if self.log_amplitude {
            spec.log_amplitude = true;
        }
        if self.l2_normalize {
            spec.l2_normalize = true;
        }
    }
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let clock = Instant::now();
    let mut config = load_config(&cli.config)?;
    let flags = SpecFlags {
        log_amplitude: cli.log_amplitude,
        l2_normalize: cli.l2_normalize,
    };
    ensure_out_dir(&cli.out)?;
    let name = match &cli.command {
        Command::Simulate(_) => "simulate",
        Command::Extract(_) => "extract",
        Command::Decompose(_) => "decompose",
        Command::FitTransform(_) => "fit-transform",
        Command::Identify(_) => "identify",
        Command::Evaluate(_) => "evaluate",
        Command::RunOnline(_) => "run-online",
    }
    .to_string();

    match cli.command {
        Command::Simulate(args) => {
            if let Some(seed) = args.seed {
                config.scenario.seed = seed;
            }
            if let Some(p) = args.persons {
                config.scenario.n_persons = p;
            }
            if let Some(w) = args.walks {
                config.scenario.walks_per_person = w;
            }
            if let Some(s) = args.sensors {
                config.scenario.n_sensors = s;
            }
            if let Some(g) = args.grid {
                config.scenario.n_grid_locations = g;
            }
            if let Some(fs) = args.sample_rate {
                config.scenario.sample_rate_hz = fs;
            }
            let mut dataset = build_dataset(&config.scenario)?;
            if let Some(spec) = &config.features {
                dataset.manifest.feature_spec = spec.clone();
            }
            flags.apply(&mut dataset.manifest.feature_spec);
            dataset.manifest.feature_spec.validate()?;
            let manifest = write_dataset(&dataset, &cli.out)?;
            println!(
                "simulate: {} sessions ({} structures, {} persons) -> {}",
                dataset.sessions.len(),
                dataset.manifest.structures.len(),
                dataset.person_ids().len(),
                manifest.display()
            );
        }
        Command::Extract(args) => {
            let dataset = load_dataset(&manifest_path(&cli.out, &args.dataset.dataset))?;
            let spec = spec_of(&dataset, &config, flags, args.detection_sigma)?;
            let sessions = extract_dataset(&dataset, &spec)?;
            let features = all_features(&sessions);
            if features.is_empty() {
                return Err(Error::NoEvents);
            }
            let path = cli.out.join("features.csv");
            save_features(&features, &path)?;
            println!(
                "extract: {} feature vectors from {} sessions -> {}",
                features.len(),
                sessions.len(),
                path.display()
            );
        }
        Command::Decompose(args) => {
            let dataset = load_dataset(&manifest_path(&cli.out, &args.dataset))?;
            let spec = spec_of(&dataset, &config, flags, None)?;
            let sessions = extract_dataset(&dataset, &spec)?;
            let (report, scatter) = decompose_located(&sessions)?;
            let report_path = cli.out.join("variability.json");
            pipeline::save_json(&report, &report_path)?;
            let scatter_path = cli.out.join("scatter_decompose.csv");
            pipeline::write_scatter_csv(&scatter, &scatter_path)?;
            for (sid, sv) in &report.structures {
                for (kind, summary) in &sv.by_kind {
                    println!(
                        "decompose: {sid}/{kind}: structure_share {:.4} over {} locations, {} samples",
                        summary.structure_share, summary.group_count, summary.sample_count
                    );
                }
            }
            println!(
                "decompose: wrote {} and {}",
                report_path.display(),
                scatter_path.display()
            );
        }
        Command::FitTransform(args) => {
            if let Some(m) = args.n_components {
                config.fisher.n_components = Some(m);
            }
            if let Some(g) = args.gamma {
                config.fisher.regularization = Some(g);
            }
            let dataset = load_dataset(&manifest_path(&cli.out, &args.dataset.dataset))?;
            let spec = spec_of(&dataset, &config, flags, None)?;
            let sessions = extract_dataset(&dataset, &spec)?;
            let walks_of = |sid: Option<&str>| -> Vec<FeatureVector> {
                sessions
                    .iter()
                    .filter(|s| {
                        s.kind == ImpulseKind::FootstepWalk
                            && sid.map_or(true, |id| s.structure_id == id)
                    })
                    .flat_map(|s| s.features.iter().cloned())
                    .collect()
            };
            let mut targets: Vec<(PathBuf, Vec<FeatureVector>)> = Vec::new();
            match args.scope {
                FitScope::PerStructure => {
                    for sid in dataset.structure_ids() {
                        targets.push((
                            cli.out.join(format!("transform_{sid}.json")),
                            walks_of(Some(&sid)),
                        ));
                    }
                }
                FitScope::Joint => {
                    targets.push((cli.out.join("transform.json"), walks_of(None)));
                }
            }
            for (path, feats) in targets {
                if feats.is_empty() {
                    return Err(Error::NoEvents);
                }
                // transforms are fit (and later applied) in the
                // modeling space the spec selects
                let (_, groups) =
                    pipeline::model_vector_groups(&spec, feats, GroupingMode::ByPerson)?;
                let transform = FisherTransform::fit(&groups, &config.fisher)?;
                pipeline::save_json(&transform.to_stored(), &path)?;
                println!(
                    "fit-transform: {} persons, {} -> {} dims, leading ratio {:.3} -> {}",
                    transform.class_count,
                    transform.input_dim(),
                    transform.output_dim(),
                    transform.eigenvalues.first().copied().unwrap_or(0.0),
                    path.display()
                );
            }
        }
        Command::Identify(args) => {
            let model = DpmmModel::load(&args.model)?;
            let transform = match &args.transform {
                Some(p) => {
                    let stored: StoredFisherTransform = pipeline::load_json(p)?;
                    Some(FisherTransform::from_stored(&stored)?)
                }
                None => None,
            };
            let features_path = args
                .features
                .unwrap_or_else(|| cli.out.join("features.csv"));
            let features = load_features(&features_path)?;
            let mut spec = config
                .features
                .clone()
                .unwrap_or_else(|| FeatureSpec::default_for_rate(2000.0));
            flags.apply(&mut spec);
            let rows = identify_features(&spec, &model, transform.as_ref(), &features)?;
            let path = cli.out.join("identify.json");
            pipeline::save_json(&rows, &path)?;
            let new_count = rows.iter().filter(|r| r.is_new).count();
            println!(
                "identify: {} samples, {} flagged as new persons -> {}",
                rows.len(),
                new_count,
                path.display()
            );
        }
        Command::Evaluate(args) => {
            if let Some(m) = args.n_components {
                config.fisher.n_components = Some(m);
            }
            if let Some(g) = args.gamma {
                config.fisher.regularization = Some(g);
            }
            let dataset = load_dataset(&manifest_path(&cli.out, &args.dataset.dataset))?;
            let spec = spec_of(&dataset, &config, flags, None)?;
            let sessions = extract_dataset(&dataset, &spec)?;
            let report = evaluate_dataset(&spec, &sessions, &config.fisher)?;
            let path = cli.out.join("evaluate.json");
            pipeline::save_json(&report, &path)?;
            for (sid, m) in &report.structures {
                println!(
                    "evaluate: {sid}: within-person variability ratio {:.4} ({} persons, {} samples)",
                    m.within_person_variability_ratio, m.person_count, m.sample_count
                );
            }
            println!("evaluate: wrote {}", path.display());
        }
        Command::RunOnline(args) => {
            if args.no_transform {
                config.online.transform_enabled = false;
            }
            if let Some(p) = args.seed_person {
                config.online.seed_person = Some(p);
            }
            if let Some(w) = args.seed_walks {
                config.online.seed_walks = w;
            }
            if let Some(c) = args.confirm {
                config.online.newcomer_confirmation = c;
            }
            if let Some(a) = args.alpha {
                config.dpmm.concentration = a;
            }
            if let Some(mode) = args.assignment_mode {
                config.dpmm.assignment_mode = match mode {
                    ModeArg::PerFootstep => AssignmentMode::PerFootstep,
                    ModeArg::PerTraceMajority => AssignmentMode::PerTraceMajority,
                };
            }
            let dataset = load_dataset(&manifest_path(&cli.out, &args.dataset.dataset))?;
            let persons = dataset.person_ids();
            if persons.len() < 2 {
                return Err(Error::DegenerateData {
                    reason: format!(
                        "online run needs at least 2 persons, dataset has {}",
                        persons.len()
                    ),
                });
            }
            let spec = spec_of(&dataset, &config, flags, None)?;
            let sessions = extract_dataset(&dataset, &spec)?;
            let output = run_online(&spec, &sessions, &config.fisher, &config.dpmm, &config.online)?;
            let report_path = cli.out.join("report.json");
            pipeline::save_json(&output.report, &report_path)?;
            pipeline::write_projection_csv(
                &output.report.projection_before,
                &cli.out.join("projection_before.csv"),
            )?;
            pipeline::write_projection_csv(
                &output.report.projection_after,
                &cli.out.join("projection_after.csv"),
            )?;
            for (sid, model, transform) in &output.models {
                model.save(&cli.out.join(format!("model_{sid}.json")))?;
                if let Some(t) = transform {
                    pipeline::save_json(
                        &t.to_stored(),
                        &cli.out.join(format!("transform_{sid}.json")),
                    )?;
                }
            }
            for s in &output.report.structures {
                println!(
                    "run-online: {}: accuracy {:.4} over {} streamed samples, {} clusters, {} refits",
                    s.structure_id,
                    s.accuracy,
                    s.streamed_samples,
                    s.cluster_sizes.len(),
                    s.refit_log.len()
                );
            }
            println!("run-online: wrote {}", report_path.display());
        }
    }

    let meta = RunMeta {
        command: name,
        started_unix_s: started,
        duration_s: clock.elapsed().as_secs_f64(),
    };
    pipeline::save_json(&meta, &cli.out.join("run_meta.json"))?;
    Ok(())
}
