use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use mmreid_core::augmentation::policy::{format_rect_log, preview_grid};
use mmreid_core::augmentation::{apply_policy_batch, AugmentPolicy, ImagePair, Preset};
use mmreid_core::corruption::{corrupt_dataset, CorruptionPolicy, SeverityRule, ERROR_LOG_NAME, RECORD_LOG_NAME};
use mmreid_core::imaging::{load_image, save_image};
use mmreid_core::metrics::{
    cochran_q, evaluate_trials, mcnemar, BinaryOutcomeMatrix, EmbeddingTable, EvalConfig, EvalReport, TrialInput,
};
use mmreid_core::protocol::{
    load_manifest, looq_trials, make_folds, pair_images, parse_pairings, repeated_pairings, split_identities,
    DatasetKind, DatasetManifest, LooqTrial, PairingResult, SplitSpec, DEFAULT_TRIALS,
};
use mmreid_core::{ModalityTag, Rng};

use crate::config::RunConfig;
use crate::UsageError;

pub fn run(config: &RunConfig) -> Result<()> {
    match config.command.as_str() {
        "corrupt" => corrupt(config),
        "augment-preview" => augment_preview(config),
        "split" => split(config),
        "pair" => pair(config),
        "evaluate" => evaluate(config),
        "compare" => compare(config),
        other => Err(UsageError(format!("unknown command `{other}`")).into()),
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn manifest(config: &RunConfig) -> Result<DatasetManifest> {
    let path = config
        .manifest
        .as_ref()
        .ok_or_else(|| usage("--manifest is required"))?;
    let mut m = load_manifest(path)?;
    if let Some(kind) = config.dataset {
        m.dataset_kind = kind;
    }
    Ok(m)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn corrupt(config: &RunConfig) -> Result<()> {
    let m = manifest(config)?;
    let severity: SeverityRule = config.corruption.severity.parse().map_err(|e| usage(format!("{e}")))?;
    let policy = CorruptionPolicy::new(config.corruption.mode, severity);
    config.write_snapshot()?;
    let report = corrupt_dataset(&m.records, &config.input_root(), &policy, config.seed, &config.out, config.workers)?;
    println!(
        "corrupted {} images, copied {} unchanged ({} mode); log: {}",
        report.records.len(),
        report.copied,
        policy.mode,
        config.out.join(RECORD_LOG_NAME).display()
    );
    if !report.failures.is_empty() {
        for f in &report.failures {
            eprintln!("failed: {} ({}): {}", f.image_id, f.index, f.message);
        }
        let err = std::io::Error::other(format!(
            "{} of {} images failed; see {}",
            report.failures.len(),
            m.records.len(),
            config.out.join(ERROR_LOG_NAME).display()
        ));
        return Err(err.into());
    }
    Ok(())
}

fn load_pair(m: &DatasetManifest, root: &Path, identity: u64, v_id: &str, i_id: &str) -> Result<ImagePair> {
    let rec = |id: &str| m.record(id).with_context(|| format!("image `{id}` not in manifest"));
    let (v, i) = (rec(v_id)?, rec(i_id)?);
    let visible = load_image(&root.join(&v.path), ModalityTag::Visible)?;
    let infrared = load_image(&root.join(&i.path), ModalityTag::Infrared)?;
    Ok(ImagePair::new(visible, infrared, identity)?
        .with_ids(v_id, i_id)
        .with_cameras(v.camera.clone(), i.camera.clone()))
}

fn augment_preview(config: &RunConfig) -> Result<()> {
    let preset: Preset = config.augment.preset.parse().map_err(|e| usage(format!("{e}")))?;
    let n = config.augment.samples;
    if n == 0 {
        return Err(usage("--samples must be >= 1"));
    }
    let mut policy: AugmentPolicy = preset.policy();
    if let Some(p) = config.augment.masking_probability {
        policy = policy.with_masking_probability(p);
    }
    if config.augment.disable_random {
        policy = policy.with_random_steps_disabled();
    }
    policy.validate().map_err(|e| usage(format!("{e}")))?;
    let m = manifest(config)?;
    let pairing = pair_images(&m, &m.identities(), config.seed)?;
    if pairing.pairs.len() < n {
        bail!(mmreid_core::Error::InvalidDataset(format!(
            "{} pairs available, {n} requested",
            pairing.pairs.len()
        )));
    }
    let mut picks = Rng::new(config.seed).sample_indices(pairing.pairs.len(), n);
    picks.sort_unstable();
    let root = config.input_root();
    let before = picks
        .iter()
        .map(|&k| {
            let e = &pairing.pairs[k];
            load_pair(&m, &root, e.identity, &e.visible_id, &e.infrared_id)
        })
        .collect::<Result<Vec<_>>>()?;
    config.write_snapshot()?;
    let out = apply_policy_batch(&before, &policy, config.seed, config.workers)?;
    for (k, (b, (a, _))) in before.iter().zip(&out).enumerate() {
        let grid = preview_grid(std::slice::from_ref(b), std::slice::from_ref(a))?;
        save_image(&grid, &config.out.join(format!("grid_{k:03}.png")))?;
    }
    let events: Vec<_> = out.into_iter().map(|(_, e)| e).collect();
    write(&config.out.join("rects.tsv"), format_rect_log(&events))?;
    write(
        &config.out.join("policy.toml"),
        toml::to_string_pretty(&policy).context("serializing policy")?,
    )?;
    println!("wrote {n} preview grids for preset {} to {}", policy.name, config.out.display());
    Ok(())
}

fn split(config: &RunConfig) -> Result<()> {
    let m = manifest(config)?;
    let spec = split_identities(&m, config.seed)?;
    let spec = make_folds(&spec, config.protocol.folds, config.seed.wrapping_add(1))?;
    config.write_snapshot()?;
    write(&config.out.join("split.tsv"), spec.to_tsv())?;
    let sizes: Vec<String> = spec.folds.iter().map(|f| f.len().to_string()).collect();
    println!(
        "{}: {} train / {} test identities; folds {}",
        m.dataset_kind,
        spec.train.len(),
        spec.test.len(),
        sizes.join(",")
    );
    Ok(())
}

fn selected_identities(config: &RunConfig, m: &DatasetManifest) -> Result<Vec<u64>> {
    let Some(path) = &config.protocol.split else {
        return Ok(m.identities());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec = SplitSpec::from_tsv(&text, &path.display().to_string())?;
    match config.protocol.set.as_str() {
        "train" => Ok(spec.train),
        "test" => Ok(spec.test),
        "all" => Ok(m.identities()),
        other => Err(usage(format!("--set must be train, test or all, got `{other}`"))),
    }
}

fn pair(config: &RunConfig) -> Result<()> {
    let m = manifest(config)?;
    let ids = selected_identities(config, &m)?;
    let trials = config.protocol.trials.unwrap_or(match m.dataset_kind {
        DatasetKind::Sysu => DEFAULT_TRIALS,
        _ => 1,
    });
    if trials == 0 {
        return Err(usage("--trials must be >= 1"));
    }
    let pairings = repeated_pairings(&m, &ids, trials, config.seed)?;
    config.write_snapshot()?;
    let dir = config.out.join("pairings");
    for p in &pairings {
        write(
            &dir.join(format!("trial_{:03}.tsv", p.trial_index)),
            mmreid_core::protocol::format_pairings(std::slice::from_ref(p)),
        )?;
    }
    println!(
        "{} trials of {} pairs over {} identities in {}",
        trials,
        pairings[0].pairs.len(),
        ids.len(),
        dir.display()
    );
    Ok(())
}

/// Files named directly, plus the sorted regular files of named directories.
fn expand(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()
                .with_context(|| format!("listing {}", p.display()))?;
            entries.retain(|e| e.is_file());
            entries.sort();
            out.extend(entries);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn looq_from_table(table: &EmbeddingTable) -> Vec<LooqTrial> {
    let mut ids: Vec<usize> = table.ids().iter().map(|&id| id as usize).collect();
    ids.sort_unstable();
    ids.iter()
        .map(|&probe| LooqTrial {
            probe,
            gallery: ids.iter().copied().filter(|&g| g != probe).collect(),
        })
        .collect()
}

fn check_identities(table: &EmbeddingTable, pairing: &PairingResult, file: &Path) -> Result<()> {
    for (i, p) in pairing.pairs.iter().enumerate() {
        if let Some(row) = table.row_of(i as u64) {
            if table.identity(row) != p.identity {
                bail!(mmreid_core::Error::InvalidDataset(format!(
                    "{}: pair {i} has identity {} but the pairing says {}",
                    file.display(),
                    table.identity(row),
                    p.identity
                )));
            }
        }
    }
    Ok(())
}

fn outcomes_tsv(report: &EvalReport) -> String {
    let mut out = String::from("trial\tprobe\trank1\n");
    for t in &report.trials {
        for (q, r) in t.rank1.iter().enumerate() {
            let v = match r {
                Some(true) => "1",
                Some(false) => "0",
                None => "-",
            };
            out.push_str(&format!("{}\t{q}\t{v}\n", t.trial));
        }
    }
    out
}

fn evaluate(config: &RunConfig) -> Result<()> {
    let files = expand(&config.evaluate.embeddings)?;
    if files.is_empty() {
        return Err(usage("--embeddings is required"));
    }
    let tables = files
        .iter()
        .map(|f| EmbeddingTable::load(f))
        .collect::<mmreid_core::Result<Vec<_>>>()?;
    let pairing_files = expand(&config.evaluate.pairings)?;
    let looqs: Vec<Vec<LooqTrial>> = if pairing_files.is_empty() {
        tables.iter().map(looq_from_table).collect()
    } else {
        if pairing_files.len() != files.len() {
            return Err(usage(format!(
                "{} embedding files but {} pairing files",
                files.len(),
                pairing_files.len()
            )));
        }
        let mut out = Vec::new();
        for ((pf, table), ef) in pairing_files.iter().zip(&tables).zip(&files) {
            let text = std::fs::read_to_string(pf).with_context(|| format!("reading {}", pf.display()))?;
            let mut parsed = parse_pairings(&text, &pf.display().to_string())?;
            if parsed.len() != 1 {
                bail!(mmreid_core::Error::InvalidDataset(format!(
                    "{} holds {} trials, expected 1",
                    pf.display(),
                    parsed.len()
                )));
            }
            let pairing = parsed.remove(0);
            check_identities(table, &pairing, ef)?;
            out.push(looq_trials(&pairing)?);
        }
        out
    };
    let eval_config = EvalConfig {
        metric: config.evaluate.metric,
        normalize: config.evaluate.normalize,
        ..Default::default()
    };
    let inputs: Vec<TrialInput<'_>> = tables
        .iter()
        .zip(&looqs)
        .map(|(embeddings, looq)| TrialInput { embeddings, looq })
        .collect();
    let pool = rayon_pool(config.workers)?;
    let report = pool.install(|| evaluate_trials(&inputs, &eval_config))?;
    config.write_snapshot()?;
    write(&config.out.join("report.txt"), report.to_table())?;
    write(&config.out.join("report.tsv"), report.to_tsv())?;
    write(&config.out.join("outcomes.tsv"), outcomes_tsv(&report))?;
    print!("{}", report.to_table());
    Ok(())
}

fn rayon_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .context("building thread pool")
}

/// `(trial, probe) -> rank-1 outcome` of one `outcomes.tsv`.
fn parse_outcomes(path: &Path) -> Result<BTreeMap<(usize, usize), Option<u8>>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let bad = || mmreid_core::Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: "expected `trial<TAB>probe<TAB>0|1|-`".into(),
        };
        let cols: Vec<&str> = line.split('\t').collect();
        let [t, q, v] = cols[..] else { bail!(bad()) };
        let key = (t.parse().map_err(|_| bad())?, q.parse().map_err(|_| bad())?);
        let v = match v {
            "1" => Some(1),
            "0" => Some(0),
            "-" => None,
            _ => bail!(bad()),
        };
        out.insert(key, v);
    }
    Ok(out)
}

fn compare(config: &RunConfig) -> Result<()> {
    let files = &config.evaluate.outcomes;
    if files.len() < 2 {
        return Err(usage("compare needs at least two outcome files"));
    }
    let tables = files.iter().map(|f| parse_outcomes(f)).collect::<Result<Vec<_>>>()?;
    if tables.iter().any(|t| t.keys().ne(tables[0].keys())) {
        bail!(mmreid_core::Error::InvalidDataset(
            "outcome files cover different (trial, probe) queries".into()
        ));
    }
    let rows: Vec<Vec<u8>> = tables[0]
        .keys()
        .filter_map(|k| tables.iter().map(|t| t[k]).collect::<Option<Vec<u8>>>())
        .collect();
    let matrix = BinaryOutcomeMatrix::new(rows.clone())?;
    let result = cochran_q(&matrix)?;
    config.write_snapshot()?;
    let mut text = format!(
        "models\t{}\nqueries\t{}\nq\t{:.10}\ndf\t{}\np\t{:.10e}\n",
        files.len(),
        matrix.rows(),
        result.q,
        result.df,
        result.p_value
    );
    if files.len() == 2 {
        let b = rows.iter().filter(|r| r[0] == 1 && r[1] == 0).count() as u64;
        let c = rows.iter().filter(|r| r[0] == 0 && r[1] == 1).count() as u64;
        text.push_str(&format!("mcnemar\t{:.10}\n", mcnemar(b, c)));
    }
    write(&config.out.join("cochran.tsv"), &text)?;
    print!("{text}");
    Ok(())
}
