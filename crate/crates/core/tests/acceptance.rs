//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use mmreid_core::augmentation::masking::modality_mask_logged;
use mmreid_core::augmentation::{apply_policy_batch, AugmentPolicy, ImagePair, MPatchGeometry, PatchParams, PatchVariant, Preset};
use mmreid_core::corruption::{apply_corruption, applicable_kinds, corrupt_dataset, CorruptionKind, CorruptionMode, CorruptionPolicy, Severity, SeverityRule};
use mmreid_core::imaging::{psnr, save_image};
use mmreid_core::metrics::{
    average_precision, average_precision_from_mask, cmc_at, cochran_q, evaluate_trials, inp_from_mask, inverse_negative_penalty, label_smoothed_ce,
    mcnemar, rank_rows, BinaryOutcomeMatrix, EmbeddingTable, EvalConfig, Metric, TrialInput,
};
use mmreid_core::protocol::{
    load_manifest, looq_trials, make_folds, pair_images, repeated_pairings, split_identities, DatasetKind, DatasetManifest, ImageRecord,
};
use mmreid_core::rng::derive_seed;
use mmreid_core::{Error, ImageBuffer, ModalityTag, Rect, Rng};
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: Error) -> String {
    e.to_string()
}

/// Smooth gradient plus sinusoidal texture and mild noise.
fn probe_image(w: usize, h: usize, modality: ModalityTag, seed: u64) -> ImageBuffer {
    let mut rng = Rng::new(seed);
    let (fx, fy) = (rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3));
    let phase = rng.uniform(0.0, std::f64::consts::TAU);
    let tint = [rng.uniform(0.6, 1.0), rng.uniform(0.6, 1.0), rng.uniform(0.6, 1.0)];
    let mut px = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let base = 60.0 + 120.0 * (y as f64 / h as f64) + 50.0 * ((x as f64 * fx + phase).sin() * (y as f64 * fy).cos());
            let n = rng.gaussian(0.0, 4.0);
            match modality {
                ModalityTag::Visible => px.extend(tint.map(|t| (base * t + n).clamp(0.0, 255.0) as u8)),
                ModalityTag::Infrared => px.extend([(base + n).clamp(0.0, 255.0) as u8; 3]),
            }
        }
    }
    ImageBuffer::new(w, h, px, modality).expect("consistent buffer")
}

// ---- 1. metric oracle ---------------------------------------------------

/// Rank of every gallery item by counting strictly-better items, with the
/// squared integer distance and the pair id as keys. No sorting involved.
fn oracle_ranks(sq: &[(i64, u64)]) -> Vec<usize> {
    sq.iter()
        .map(|a| 1 + sq.iter().filter(|b| (b.0, b.1) < (a.0, a.1)).count())
        .collect()
}

fn oracle_metrics(ranks: &[usize], pos: &[bool]) -> Option<(f64, f64, [bool; 3])> {
    let pos_ranks: Vec<usize> = ranks.iter().zip(pos).filter(|(_, &p)| p).map(|(&r, _)| r).collect();
    if pos_ranks.is_empty() {
        return None;
    }
    let np = pos_ranks.len() as f64;
    let ap = pos_ranks
        .iter()
        .map(|&r| pos_ranks.iter().filter(|&&s| s <= r).count() as f64 / r as f64)
        .sum::<f64>()
        / np;
    let inp = np / *pos_ranks.iter().max().unwrap() as f64;
    let cmc = [1, 5, 10].map(|k| pos_ranks.iter().any(|&r| r <= k));
    Some((ap, inp, cmc))
}

fn metric_oracle() -> Check {
    let start = Instant::now();
    let mut rng = Rng::new(1);
    let mut compared = 0usize;
    for inst in 0..1000 {
        let n = 1 + rng.index(8);
        let dim = 1 + rng.index(4);
        let mut table = EmbeddingTable::new(dim);
        let mut ints = Vec::new();
        // Row 0 is the probe; ids are shuffled so tie-breaks are exercised.
        let mut ids: Vec<u64> = (0..=n as u64).map(|i| i * 3 + 1).collect();
        rng.shuffle(&mut ids);
        for &id in &ids {
            let v: Vec<i64> = (0..dim).map(|_| rng.range_inclusive(0, 3)).collect();
            let identity = rng.below(3);
            let f: Vec<f32> = v.iter().map(|&x| x as f32).collect();
            table.push(id, identity, &f).map_err(err)?;
            ints.push((v, identity));
        }
        let gallery: Vec<usize> = (1..=n).collect();
        let r = rank_rows(&table, 0, &gallery, Metric::Euclidean, false);

        let sq: Vec<(i64, u64)> = gallery
            .iter()
            .map(|&g| (ints[g].0.iter().zip(&ints[0].0).map(|(a, b)| (a - b) * (a - b)).sum(), ids[g]))
            .collect();
        let pos: Vec<bool> = gallery.iter().map(|&g| ints[g].1 == ints[0].1).collect();
        let ranks = oracle_ranks(&sq);
        for (g, &rank) in ranks.iter().enumerate() {
            ensure(r.order[rank - 1] == ids[gallery[g]], || format!("instance {inst}: order differs from oracle"))?;
        }
        match oracle_metrics(&ranks, &pos) {
            None => ensure(average_precision(&r).is_none() && inverse_negative_penalty(&r).is_none(), || {
                format!("instance {inst}: no positives but metrics defined")
            })?,
            Some((ap, inp, cmc)) => {
                let got_ap = average_precision(&r).unwrap();
                let got_inp = inverse_negative_penalty(&r).unwrap();
                ensure((got_ap - ap).abs() <= 1e-12 && (got_inp - inp).abs() <= 1e-12, || {
                    format!("instance {inst}: AP {got_ap} vs {ap}, INP {got_inp} vs {inp}")
                })?;
                for (j, k) in [1, 5, 10].into_iter().enumerate() {
                    ensure(cmc_at(&r, k) == cmc[j], || format!("instance {inst}: CMC@{k}"))?;
                }
                compared += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.2}s"))?;
    Ok(format!("1000 instances, {compared} with positives, {secs:.3}s"))
}

// ---- 2. hand values -----------------------------------------------------

fn hand_values() -> Check {
    let mask = [true, false, true, false, false];
    let ap = average_precision_from_mask(&mask).unwrap();
    let inp = inp_from_mask(&mask).unwrap();
    ensure((ap - 0.8333).abs() <= 1e-4 && (ap - 5.0 / 6.0).abs() <= 1e-9, || format!("AP {ap}"))?;
    ensure((inp - 0.6667).abs() <= 1e-4 && (inp - 2.0 / 3.0).abs() <= 1e-9, || format!("INP {inp}"))?;
    let mut worst: f64 = 0.0;
    for c in [2usize, 10, 395] {
        for eps in [0.0, 0.1] {
            let logits = vec![vec![0.7; c]; 3];
            let ce = label_smoothed_ce(&logits, &[0, 1, c - 1], eps).map_err(err)?;
            worst = worst.max((ce - (c as f64).ln()).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("CE off by {worst:e}"))?;
    Ok(format!("AP={ap:.4} INP={inp:.4} |CE-lnC|<={worst:.1e}"))
}

// ---- 3. protocol numbers ------------------------------------------------

fn manifest_with(kind: DatasetKind, identities: u64) -> DatasetManifest {
    let records = (0..identities)
        .flat_map(|id| {
            [ModalityTag::Visible, ModalityTag::Infrared].map(|m| ImageRecord {
                image_id: format!("{id}_{}", m.as_str()),
                identity: id,
                camera: "cam".into(),
                modality: m,
                path: PathBuf::from(format!("{id}_{}.png", m.as_str())),
            })
        })
        .collect();
    DatasetManifest::new(kind, false, records).expect("valid manifest")
}

fn protocol_numbers() -> Check {
    let mut detail = Vec::new();
    for (kind, total, train, test, fold) in [
        (DatasetKind::Sysu, 491, 395, 96, Some(79)),
        (DatasetKind::Regdb, 412, 206, 206, None),
        (DatasetKind::Tworld, 409, 325, 84, Some(65)),
    ] {
        let m = manifest_with(kind, total);
        let split = split_identities(&m, 5).map_err(err)?;
        ensure(split.train.len() == train && split.test.len() == test, || {
            format!("{kind}: {}/{}", split.train.len(), split.test.len())
        })?;
        let folded = make_folds(&split, 5, 6).map_err(err)?;
        let sizes: Vec<usize> = folded.folds.iter().map(Vec::len).collect();
        if let Some(f) = fold {
            ensure(sizes == vec![f; 5], || format!("{kind} folds {sizes:?}"))?;
        }
        ensure(sizes.iter().sum::<usize>() == train, || format!("{kind} folds do not cover train"))?;
        detail.push(format!("{kind} {train}/{test} folds {sizes:?}"));
    }
    for n in [2usize, 7, 96] {
        let m = manifest_with(DatasetKind::Custom, n as u64);
        let pairing = pair_images(&m, &m.identities(), 1).map_err(err)?;
        let looq = looq_trials(&pairing).map_err(err)?;
        ensure(looq.len() == n, || format!("looq {n}: {} trials", looq.len()))?;
        for (i, t) in looq.iter().enumerate() {
            let expected: Vec<usize> = (0..n).filter(|&g| g != i).collect();
            ensure(t.probe == i && t.gallery == expected, || format!("looq {n}: trial {i}"))?;
        }
    }
    Ok(detail.join("; "))
}

// ---- 4. pairing constraint ----------------------------------------------

fn pairing_constraint() -> Check {
    let mut rng = Rng::new(4);
    let mut records = Vec::new();
    let mut counts = BTreeMap::new();
    for id in 0..500u64 {
        let (nv, ni) = (1 + rng.index(20), 1 + rng.index(20));
        counts.insert(id, (nv, ni));
        for (m, n) in [(ModalityTag::Visible, nv), (ModalityTag::Infrared, ni)] {
            for k in 0..n {
                records.push(ImageRecord {
                    image_id: format!("{id}/{}{k}", m.as_str()),
                    identity: id,
                    camera: "cam".into(),
                    modality: m,
                    path: PathBuf::from(format!("{id}/{}{k}.jpg", m.as_str())),
                });
            }
        }
    }
    let m = DatasetManifest::new(DatasetKind::Sysu, false, records).map_err(err)?;
    let start = Instant::now();
    let pairing = pair_images(&m, &m.identities(), 99).map_err(err)?;
    let mut per_id: BTreeMap<u64, usize> = BTreeMap::new();
    let mut seen = HashSet::new();
    for p in &pairing.pairs {
        *per_id.entry(p.identity).or_default() += 1;
        ensure(seen.insert(p.visible_id.clone()), || format!("{} reused", p.visible_id))?;
        ensure(seen.insert(p.infrared_id.clone()), || format!("{} reused", p.infrared_id))?;
        let (v, i) = (m.record(&p.visible_id).unwrap(), m.record(&p.infrared_id).unwrap());
        ensure(
            v.identity == p.identity && i.identity == p.identity && v.modality == ModalityTag::Visible && i.modality == ModalityTag::Infrared,
            || format!("pair {:?} crosses identity or modality", p),
        )?;
    }
    for (id, (nv, ni)) in &counts {
        let got = per_id.get(id).copied().unwrap_or(0);
        ensure(got == *nv.min(ni), || format!("identity {id}: {got} pairs for {nv}/{ni}"))?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 1.0, || format!("took {secs:.2}s"))?;
    Ok(format!("{} pairs over 500 identities, {secs:.3}s", pairing.pairs.len()))
}

// ---- 5. infrared applicability ------------------------------------------

fn infrared_adaptation() -> Check {
    let kinds = applicable_kinds(ModalityTag::Infrared);
    ensure(kinds.len() == 19 && !kinds.contains(&CorruptionKind::Brightness), || {
        format!("{} infrared kinds", kinds.len())
    })?;
    let probe = probe_image(144, 288, ModalityTag::Infrared, 5);
    match apply_corruption(&probe, CorruptionKind::Brightness, Severity::new(3).unwrap(), &mut Rng::new(0)) {
        Err(Error::NotApplicable { .. }) => {}
        other => return Err(format!("brightness on infrared gave {:?}", other.map(|_| ()))),
    }
    let mut runs = 0;
    for kind in &kinds {
        for s in Severity::all() {
            let out = apply_corruption(&probe, *kind, s, &mut Rng::new(derive_seed(5, runs))).map_err(err)?;
            let spread = out.max_channel_spread();
            ensure(spread == 0 && out.modality() == ModalityTag::Infrared, || {
                format!("{kind} severity {} spread {spread}", s.level())
            })?;
            runs += 1;
        }
    }
    Ok(format!("19 kinds, {runs} outputs with max|R-G|=max|R-B|=0"))
}

// ---- 6. severity monotonicity -------------------------------------------

fn severity_monotonicity() -> Check {
    let probes: Vec<ImageBuffer> = (0..16).map(|i| probe_image(144, 288, ModalityTag::Visible, 600 + i)).collect();
    let mut lines = Vec::new();
    for kind in [CorruptionKind::GaussianNoise, CorruptionKind::ShotNoise, CorruptionKind::DefocusBlur, CorruptionKind::GaussianBlur] {
        let mut means = Vec::new();
        for s in Severity::all() {
            let mut total = 0.0;
            for (i, p) in probes.iter().enumerate() {
                let out = apply_corruption(p, kind, s, &mut Rng::new(derive_seed(6, i as u64))).map_err(err)?;
                total += psnr(p, &out).map_err(err)?;
            }
            means.push(total / probes.len() as f64);
        }
        ensure(means.windows(2).all(|w| w[1] < w[0]), || format!("{kind} PSNR {means:.2?}"))?;
        lines.push(format!("{kind} {:.1}->{:.1}dB", means[0], means[4]));
    }
    Ok(lines.join(", "))
}

// ---- 7. masking statistics ----------------------------------------------

fn masking_statistics() -> Check {
    let pair = ImagePair::new(
        probe_image(4, 8, ModalityTag::Visible, 7),
        probe_image(4, 8, ModalityTag::Infrared, 8),
        1,
    )
    .map_err(err)?;
    let mut rng = Rng::new(7);
    let (mut visible, mut infrared) = (0u32, 0u32);
    for _ in 0..80_000 {
        let (out, event) = modality_mask_logged(&pair, 1.0 / 8.0, &mut rng).map_err(err)?;
        match event {
            Some(ModalityTag::Visible) => {
                ensure(out.visible.pixels().iter().all(|&v| v == 0) && out.infrared == pair.infrared, || "visible mask wrong".into())?;
                visible += 1;
            }
            Some(ModalityTag::Infrared) => {
                ensure(out.infrared.pixels().iter().all(|&v| v == 0) && out.visible == pair.visible, || "infrared mask wrong".into())?;
                infrared += 1;
            }
            None => ensure(out == pair, || "unmasked pair changed".into())?,
        }
    }
    let events = visible + infrared;
    let share = f64::from(visible) / f64::from(events);
    ensure((9500..=10500).contains(&events), || format!("{events} events"))?;
    ensure((0.47..=0.53).contains(&share), || format!("visible share {share:.4}"))?;
    Ok(format!("{events} events, visible share {share:.4}"))
}

// ---- 8. M-PATCH geometry ------------------------------------------------

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn m_patch_geometry() -> Check {
    let params = PatchParams { probability: 1.0, ..PatchParams::default() };
    let (w, h) = (144, 288);
    let draw = |variant: PatchVariant, seed: u64| -> Vec<MPatchGeometry> {
        let mut rng = Rng::new(seed);
        let mut out = Vec::with_capacity(10_000);
        while out.len() < 10_000 {
            if let Some(g) = MPatchGeometry::draw(variant, w, h, &params, &mut rng) {
                out.push(g);
            }
        }
        out
    };
    let ss = draw(PatchVariant::SS, 81);
    ensure(
        ss.iter().all(|g| g.visible_src == g.visible_dst && g.visible_src == g.infrared_src && g.visible_src == g.infrared_dst),
        || "SS rects differ".into(),
    )?;

    let max_r = |rects: &[Vec<Rect>]| -> f64 {
        let mut worst: f64 = 0.0;
        let coords: Vec<[Vec<f64>; 2]> = rects
            .iter()
            .map(|rs| [rs.iter().map(|r| r.center().0).collect(), rs.iter().map(|r| r.center().1).collect()])
            .collect();
        for i in 0..coords.len() {
            for j in i + 1..coords.len() {
                for a in 0..2 {
                    for b in 0..2 {
                        worst = worst.max(pearson(&coords[i][a], &coords[j][b]).abs());
                    }
                }
            }
        }
        worst
    };

    let sd = draw(PatchVariant::SD, 82);
    ensure(sd.iter().all(|g| g.visible_src == g.infrared_src), || "SD sources differ".into())?;
    let r_sd = max_r(&[sd.iter().map(|g| g.visible_dst).collect(), sd.iter().map(|g| g.infrared_dst).collect()]);
    ensure(r_sd < 0.05, || format!("SD destination |r| = {r_sd:.4}"))?;

    let dd = draw(PatchVariant::DD, 83);
    let r_dd = max_r(&[
        dd.iter().map(|g| g.visible_src).collect(),
        dd.iter().map(|g| g.infrared_src).collect(),
        dd.iter().map(|g| g.visible_dst).collect(),
        dd.iter().map(|g| g.infrared_dst).collect(),
    ]);
    ensure(r_dd < 0.05, || format!("DD |r| = {r_dd:.4}"))?;
    let distinct = dd.iter().filter(|g| g.visible_src != g.infrared_src).count();
    ensure(distinct > 9_900, || format!("DD sources coincide {} times", 10_000 - distinct))?;
    Ok(format!("SS exact, SD max|r|={r_sd:.4}, DD max|r|={r_dd:.4}"))
}

// ---- 9. determinism -----------------------------------------------------

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).expect("readable dir") {
            let p = e.expect("dir entry").path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).expect("readable file"));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Writes `identities` identities with `per` images per modality and returns
/// the loaded manifest.
fn write_dataset(dir: &Path, kind: &str, identities: u64, per: usize, size: (usize, usize)) -> std::result::Result<DatasetManifest, String> {
    let mut text = format!("#manifest\tdataset={kind}\n");
    for id in 0..identities {
        for (tag, m) in [("v", ModalityTag::Visible), ("i", ModalityTag::Infrared)] {
            for k in 0..per {
                let rel = format!("{id:03}/{tag}{k}.png");
                let seed = id * 1000 + k as u64 * 2 + u64::from(tag == "i");
                save_image(&probe_image(size.0, size.1, m, seed), &dir.join(&rel)).map_err(err)?;
                text.push_str(&format!("{id}_{tag}{k}\t{id}\tcam_{tag}\t{}\t{rel}\n", m.as_str()));
            }
        }
    }
    let path = dir.join("manifest.tsv");
    fs::write(&path, text).map_err(|e| e.to_string())?;
    load_manifest(&path).map_err(err)
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    let m = write_dataset(&data, "sysu", 10, 5, (48, 96))?;
    ensure(m.records.len() == 100, || format!("{} images", m.records.len()))?;

    let policy = CorruptionPolicy::new(CorruptionMode::Both, SeverityRule::UniformRandom);
    let mut corrupt_trees = Vec::new();
    for (run, workers) in [1, 8, 1, 8].into_iter().enumerate() {
        let out = tmp.path().join(format!("corrupt{run}"));
        let report = corrupt_dataset(&m.records, &data, &policy, 9, &out, workers).map_err(err)?;
        ensure(report.failures.is_empty(), || format!("failures: {:?}", report.failures))?;
        corrupt_trees.push(tree(&out));
    }

    let pairing = pair_images(&m, &m.identities(), 9).map_err(err)?;
    let pairs: Vec<ImagePair> = pairing
        .pairs
        .iter()
        .map(|p| {
            let v = m.record(&p.visible_id).unwrap();
            let i = m.record(&p.infrared_id).unwrap();
            let vi = mmreid_core::imaging::load_image(&data.join(&v.path), ModalityTag::Visible)?;
            let ii = mmreid_core::imaging::load_image(&data.join(&i.path), ModalityTag::Infrared)?;
            Ok(ImagePair::new(vi, ii, p.identity)?.with_ids(p.visible_id.clone(), p.infrared_id.clone()))
        })
        .collect::<mmreid_core::Result<_>>()
        .map_err(err)?;
    let augment = AugmentPolicy::preset(Preset::MlMda);
    let mut augment_trees = Vec::new();
    for (run, workers) in [1, 8, 1, 8].into_iter().enumerate() {
        let out = tmp.path().join(format!("augment{run}"));
        let results = apply_policy_batch(&pairs, &augment, 9, workers).map_err(err)?;
        for (k, (p, _)) in results.iter().enumerate() {
            save_image(&p.visible, &out.join(format!("{k:03}_v.png"))).map_err(err)?;
            save_image(&p.infrared, &out.join(format!("{k:03}_i.png"))).map_err(err)?;
        }
        let events: Vec<_> = results.into_iter().map(|(_, e)| e).collect();
        fs::write(out.join("rects.tsv"), mmreid_core::augmentation::policy::format_rect_log(&events)).map_err(|e| e.to_string())?;
        augment_trees.push(tree(&out));
    }
    ensure(corrupt_trees.iter().all(|t| *t == corrupt_trees[0]), || "corruption trees differ".into())?;
    ensure(augment_trees.iter().all(|t| *t == augment_trees[0]), || "augmentation trees differ".into())?;
    Ok(format!(
        "corruption {} files, augmentation {} files, 4 runs each identical",
        corrupt_trees[0].len(),
        augment_trees[0].len()
    ))
}

// ---- 10. Cochran's Q ----------------------------------------------------

/// Textbook form: (k-1) (k sum G^2 - (sum G)^2) / (k sum L - sum L^2).
fn cochran_oracle(rows: &[Vec<u8>]) -> f64 {
    let k = rows[0].len() as f64;
    let g: Vec<f64> = (0..rows[0].len()).map(|j| rows.iter().map(|r| f64::from(r[j])).sum()).collect();
    let l: Vec<f64> = rows.iter().map(|r| r.iter().map(|&v| f64::from(v)).sum()).collect();
    let num = (k - 1.0) * (k * g.iter().map(|x| x * x).sum::<f64>() - g.iter().sum::<f64>().powi(2));
    let den = k * l.iter().sum::<f64>() - l.iter().map(|x| x * x).sum::<f64>();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn cochran() -> Check {
    let same: Vec<Vec<u8>> = (0..20).map(|i| vec![(i % 3 == 0) as u8; 4]).collect();
    let r = cochran_q(&BinaryOutcomeMatrix::new(same).map_err(err)?).map_err(err)?;
    ensure(r.q == 0.0 && r.p_value == 1.0, || format!("identical columns gave {r:?}"))?;

    let mut rng = Rng::new(10);
    let mut worst: f64 = 0.0;
    let mut informative = 0;
    for _ in 0..200 {
        let n = 5 + rng.index(200);
        let k = 2 + rng.index(5);
        let bias: Vec<f64> = (0..k).map(|_| rng.uniform(0.2, 0.8)).collect();
        let rows: Vec<Vec<u8>> = (0..n).map(|_| bias.iter().map(|&p| u8::from(rng.bernoulli(p))).collect()).collect();
        let got = cochran_q(&BinaryOutcomeMatrix::new(rows.clone()).map_err(err)?).map_err(err)?;
        let q = cochran_oracle(&rows);
        let p = if q > 0.0 { ChiSquared::new((k - 1) as f64).unwrap().sf(q) } else { 1.0 };
        worst = worst.max((got.q - q).abs()).max((got.p_value - p).abs());
        ensure(got.df == k - 1, || format!("df {}", got.df))?;
        if k == 2 {
            let b = rows.iter().filter(|r| r[0] == 1 && r[1] == 0).count() as u64;
            let c = rows.iter().filter(|r| r[0] == 0 && r[1] == 1).count() as u64;
            let oracle = if b + c == 0 { 0.0 } else { (b as f64 - c as f64).powi(2) / (b + c) as f64 };
            ensure((got.q - oracle).abs() <= 1e-10 && (mcnemar(b, c) - oracle).abs() <= 1e-10, || {
                format!("k=2: Q {} vs McNemar {oracle}", got.q)
            })?;
        }
        if q > 0.0 {
            informative += 1;
        }
    }
    ensure(worst <= 1e-10, || format!("max deviation {worst:e}"))?;
    Ok(format!("200 matrices ({informative} with Q>0), max deviation {worst:.1e}"))
}

// ---- 11. end to end -----------------------------------------------------

fn end_to_end() -> Check {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    let m = write_dataset(&data, "custom", 10, 10, (144, 288))?;
    ensure(m.records.len() == 200, || format!("{} images", m.records.len()))?;

    let clean = tmp.path().join("clean");
    let report = corrupt_dataset(&m.records, &data, &CorruptionPolicy::clean(), 11, &clean, 4).map_err(err)?;
    ensure(report.records.is_empty() && report.copied == 200, || "clean run altered images".into())?;
    let m = DatasetManifest::new(m.dataset_kind, m.paired_cameras, m.records.clone()).map_err(err)?;

    let split = make_folds(&split_identities(&m, 11).map_err(err)?, 2, 12).map_err(err)?;
    let test: BTreeSet<u64> = split.test.iter().copied().collect();
    ensure(test.len() == 2 && split.train.len() == 8, || format!("split {}/{}", split.train.len(), test.len()))?;
    let pairings = repeated_pairings(&m, &split.test, 3, 11).map_err(err)?;

    let noise = 0.0;
    let mut rng = Rng::new(13);
    let mut tables = Vec::new();
    let mut looqs = Vec::new();
    for pairing in &pairings {
        let mut table = EmbeddingTable::new(10);
        for (i, p) in pairing.pairs.iter().enumerate() {
            let row: Vec<f32> = (0..10u64)
                .map(|d| (f64::from(u8::from(d == p.identity)) + noise * rng.normal()) as f32)
                .collect();
            table.push(i as u64, p.identity, &row).map_err(err)?;
        }
        tables.push(table);
        looqs.push(looq_trials(pairing).map_err(err)?);
    }
    let inputs: Vec<TrialInput<'_>> = tables.iter().zip(&looqs).map(|(embeddings, looq)| TrialInput { embeddings, looq }).collect();
    let report = evaluate_trials(&inputs, &EvalConfig::default()).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    ensure(report.mean.map == 1.0 && report.mean.minp == 1.0 && report.mean.cmc[0] == 1.0, || {
        format!("mAP {} mINP {}", report.mean.map, report.mean.minp)
    })?;
    ensure(report.excluded_queries == 0, || format!("{} excluded", report.excluded_queries))?;
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!(
        "{} trials x {} queries, mAP=mINP=1, {secs:.2}s",
        report.trials.len(),
        report.trials[0].queries
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("metric oracle equivalence", metric_oracle),
        ("hand values", hand_values),
        ("protocol numbers", protocol_numbers),
        ("pairing constraint", pairing_constraint),
        ("infrared corruption adaptation", infrared_adaptation),
        ("severity monotonicity", severity_monotonicity),
        ("masking statistics", masking_statistics),
        ("m-patch geometry", m_patch_geometry),
        ("determinism", determinism),
        ("cochran q", cochran),
        ("end to end", end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
