use std::collections::HashSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use vtinv::corpus::{read_contours_csv, write_contours_csv, Articulator, Corpus, PrepareOptions, Prepared, PreparedRecord};
use vtinv::features::{
    acoustic_frames, aligned_acoustic_frames, read_wav, write_features, write_features_csv, MfccConfig, CW11_RADIUS,
    FRAME_DIM,
};
use vtinv::metrics::{aggregate, read_frame_errors_csv, read_metrics_labels, write_frame_errors_csv, write_metrics_csv, FrameError};
use vtinv::models::{Example, Model, ModelSpec, TaskMode, Variant};
use vtinv::nn::{gradient_check, GradCheckReport, LayerProbe, ProbeKind};
use vtinv::report::{build_table, render_csv, render_overlay_svg, render_text, RunErrors};
use vtinv::synth::{baseline_mean_predictor, generate_corpus, SynthSpec};
use vtinv::training::{
    evaluate_models, load_checkpoints, per_articulator_summaries, predict_contours_px, run_experiment, truth_contours_px,
    Approach, ExperimentConfig, TrainConfig, FRAME_ERRORS_FILE, METRICS_FILE,
};
use vtinv::Error;

use crate::{EvaluateArgs, Failure, FeaturesArgs, GradcheckArgs, PlotArgs, PrepareArgs, ReportArgs, SynthArgs, TrainArgs};

type CmdResult = Result<(), Failure>;

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

fn create_dir(path: &Path) -> CmdResult {
    fs::create_dir_all(path).map_err(|e| io_failure(path, e))
}

fn write_file(path: &Path, contents: &str) -> CmdResult {
    fs::write(path, contents).map_err(|e| io_failure(path, e))
}

fn mfcc_config(path: Option<&Path>) -> Result<MfccConfig, Failure> {
    Ok(match path {
        Some(p) => MfccConfig::read(p)?,
        None => MfccConfig::default(),
    })
}

/// Per-articulator lines plus their mean, for runs that may cover only
/// some articulators.
fn print_errors(label: &str, errors: &[FrameError]) {
    let rows = per_articulator_summaries(errors);
    println!("{label}");
    for (name, s) in &rows {
        println!("  {name:<22} {:>6.3} ± {:.3} mm  (median {:.3}, {} frames)", s.rmse_mean_mm, s.rmse_std_mm, s.median_mm, s.frames);
    }
    if !rows.is_empty() {
        let mean = rows.iter().map(|(_, s)| s.rmse_mean_mm).sum::<f64>() / rows.len() as f64;
        println!("  {:<22} {mean:>6.3} mm", "mean");
    }
}

pub fn features(a: FeaturesArgs) -> CmdResult {
    let config = mfcc_config(a.config.as_deref())?;
    let mut wavs: Vec<PathBuf> = fs::read_dir(&a.wav_dir)
        .map_err(|e| io_failure(&a.wav_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    wavs.sort();
    if wavs.is_empty() {
        log::warn!("no WAV files in {}", a.wav_dir.display());
        println!("0 feature files written");
        return Ok(());
    }
    create_dir(&a.out_dir)?;
    let results: Vec<Result<usize, Error>> = wavs
        .par_iter()
        .map(|wav| {
            let waveform = read_wav(wav)?;
            let frames = if a.aligned {
                aligned_acoustic_frames(&waveform, &config)?
            } else {
                acoustic_frames(&waveform, &config)?
            };
            let stem = wav.file_stem().unwrap_or_default().to_string_lossy();
            if a.csv {
                write_features_csv(&a.out_dir.join(format!("{stem}.csv")), &frames)?;
            } else {
                write_features(&a.out_dir.join(format!("{stem}.vtf")), &frames)?;
            }
            Ok(frames.nrows())
        })
        .collect();
    let mut written = 0;
    let mut total_frames = 0;
    let mut failed = Vec::new();
    for (wav, r) in wavs.iter().zip(results) {
        match r {
            Ok(n) => {
                written += 1;
                total_frames += n;
                log::info!("{}: {n} frames", wav.display());
            }
            Err(e) => failed.push(format!("{}: {e}", wav.display())),
        }
    }
    println!("{written} feature files written, {total_frames} frames total");
    if failed.is_empty() {
        return Ok(());
    }
    eprintln!("{} file(s) failed:", failed.len());
    for f in &failed {
        eprintln!("  {f}");
    }
    Err(Failure::Data(format!("{} of {} WAV files failed", failed.len(), wavs.len())))
}

pub fn synth(a: SynthArgs) -> CmdResult {
    let spec = SynthSpec {
        n_acquisitions: a.acquisitions,
        utterances_per_acquisition: a.utterances,
        frames_per_utterance: a.frames,
        latent_dim: a.latent_dim,
        n_sinusoids: a.sinusoids,
        noise: a.noise,
        seed: a.seed,
    };
    let corpus = generate_corpus(&spec)?;
    let manifest = corpus.save(&a.out)?;
    println!(
        "{} acquisitions × {} utterances written; manifest {}",
        spec.n_acquisitions,
        spec.utterances_per_acquisition,
        manifest.display()
    );
    Ok(())
}

pub fn prepare(a: PrepareArgs) -> CmdResult {
    let mfcc = mfcc_config(a.config.as_deref())?;
    let manifest = fs::canonicalize(&a.manifest).map_err(|e| io_failure(&a.manifest, e))?;
    let corpus = Corpus::load(&manifest, &mfcc)?;
    let options = PrepareOptions {
        seed: a.seed,
        context_radius: a.context_radius,
        half_window: a.half_window,
    };
    let prepared = Prepared::fit(&corpus, options)?;
    let split = prepared.split.clone();
    let path = PreparedRecord { manifest, mfcc, prepared }.write(&a.out)?;
    let ids = |idx: &[usize]| idx.iter().map(|&i| corpus.acquisitions[i].id.as_str()).collect::<Vec<_>>().join(" ");
    println!("train {} / valid {} / test {} acquisitions", split.train.len(), split.valid.len(), split.test.len());
    println!("  valid: {}", ids(&split.valid));
    println!("  test:  {}", ids(&split.test));
    println!("wrote {}", path.display());
    Ok(())
}

fn context_radius_for(variant: Variant) -> usize {
    if variant == Variant::St5Cw11 {
        CW11_RADIUS
    } else {
        0
    }
}

pub fn train(a: TrainArgs) -> CmdResult {
    let mut exp = match &a.config {
        Some(p) => ExperimentConfig::read(p)?,
        None => ExperimentConfig {
            data: a.data.clone().ok_or_else(|| Failure::Data("--data is required without --config".into()))?,
            output_dir: a.out.clone().ok_or_else(|| Failure::Data("--out is required without --config".into()))?,
            train: TrainConfig::default(),
        },
    };
    if let Some(d) = a.data {
        exp.data = d;
    }
    if let Some(o) = a.out {
        exp.output_dir = o;
    }
    let t = &mut exp.train;
    if let Some(v) = a.variant {
        t.variant = v;
    }
    if let Some(ap) = a.approach {
        t.approach = ap;
    }
    if a.articulators.is_some() {
        t.articulators = a.articulators;
    }
    t.hidden_width = a.hidden.unwrap_or(t.hidden_width);
    t.max_epochs = a.epochs.unwrap_or(t.max_epochs);
    t.batch_size = a.batch_size.unwrap_or(t.batch_size);
    t.learning_rate = a.lr.unwrap_or(t.learning_rate);
    t.patience = a.patience.unwrap_or(t.patience);
    t.seed = a.seed.unwrap_or(t.seed);
    t.validate()?;

    let record = PreparedRecord::read(&exp.data)?;
    let dataset = record.load_dataset(Some(context_radius_for(t.variant)))?;
    log::info!(
        "{} train / {} valid / {} test utterances",
        dataset.train.len(),
        dataset.valid.len(),
        dataset.test.len()
    );
    let out = run_experiment(&dataset, &exp.train, Some(&exp.output_dir))?;
    for m in &out.summary.models {
        println!(
            "{}: best epoch {} of {} (validation loss {:.6})",
            m.name, m.best_epoch, m.epochs_run, m.best_valid_loss
        );
    }
    print_errors(
        &format!("{} {} on {} test utterances", exp.train.approach.name(), exp.train.variant, out.summary.test_utterances),
        &out.evaluation.frame_errors,
    );
    if let Some(acc) = out.evaluation.phone_accuracy {
        println!("phone accuracy {:.4}", acc);
    }
    println!("wrote {}", exp.output_dir.display());
    Ok(())
}

pub fn evaluate(a: EvaluateArgs) -> CmdResult {
    let record = PreparedRecord::read(&a.data)?;
    let (out_dir, label, errors, accuracy) = if a.mean_baseline {
        let out = a.out.ok_or_else(|| Failure::Data("--out is required with --mean-baseline".into()))?;
        let dataset = record.load_dataset(None)?;
        let baseline = baseline_mean_predictor(&dataset.train)?;
        let errors = baseline.evaluate(dataset.test.open(), dataset.pixel_spacing_mm)?;
        (out, ("baseline".to_string(), "mean".to_string()), errors, None)
    } else {
        let run = a.run.expect("clap requires --run without --mean-baseline");
        let models = load_checkpoints(&run)?;
        let input_dim = models[0].spec().input_dim;
        if models.iter().any(|m| m.spec().input_dim != input_dim) {
            return Err(Failure::Data(format!("{}: checkpoints disagree on input width", run.display())));
        }
        let radius = (input_dim / FRAME_DIM).saturating_sub(1) / 2;
        let dataset = record.load_dataset(Some(radius))?;
        let test = dataset.test.open();
        let evaluation = evaluate_models(&models, test, dataset.pixel_spacing_mm)?;
        if let Some(dir) = &a.predictions {
            create_dir(dir)?;
            for seq in test {
                write_contours_csv(&dir.join(format!("{}_pred.csv", seq.id)), &predict_contours_px(&models, seq)?)?;
                write_contours_csv(&dir.join(format!("{}_truth.csv", seq.id)), &truth_contours_px(seq)?)?;
            }
            println!("wrote contours for {} test utterances to {}", test.len(), dir.display());
        }
        let approach = if models.iter().all(|m| matches!(m.spec().task_mode, TaskMode::Aba(_))) {
            Approach::Aba
        } else {
            Approach::Aat
        };
        let label = (approach.name().to_string(), models[0].spec().variant.name().to_string());
        (a.out.unwrap_or(run), label, evaluation.frame_errors, evaluation.phone_accuracy)
    };
    create_dir(&out_dir)?;
    write_frame_errors_csv(&out_dir.join(FRAME_ERRORS_FILE), &errors)?;
    let covered: HashSet<Articulator> = errors.iter().map(|e| e.articulator).collect();
    if covered.len() == Articulator::ALL.len() {
        let mut report = aggregate(&errors, &label.0, &label.1)?;
        report.phone_accuracy = accuracy;
        write_metrics_csv(&out_dir.join(METRICS_FILE), &report)?;
    } else {
        log::warn!("only {} of 8 articulators evaluated; {METRICS_FILE} not written", covered.len());
    }
    print_errors(&format!("{} {}", label.0, label.1), &errors);
    if let Some(acc) = accuracy {
        println!("phone accuracy {acc:.4}");
    }
    println!("wrote {}", out_dir.display());
    Ok(())
}

/// `<prefix>.<ext>` without replacing any dots already in the prefix.
fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = OsString::from(prefix.as_os_str());
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn run_label(dir: &Path) -> String {
    let metrics = dir.join(METRICS_FILE);
    match read_metrics_labels(&metrics) {
        Ok((approach, model)) => format!("{approach} {model}"),
        Err(_) => dir.file_name().unwrap_or(dir.as_os_str()).to_string_lossy().into_owned(),
    }
}

pub fn report(a: ReportArgs) -> CmdResult {
    let mut runs: Vec<RunErrors> = Vec::with_capacity(a.runs.len());
    let mut baseline = a.baseline.clone();
    for dir in &a.runs {
        let mut label = run_label(dir);
        if runs.iter().any(|r| r.label == label) {
            label = format!("{label} ({})", dir.display());
        }
        if a.baseline.as_deref().is_some_and(|b| Path::new(b) == dir.as_path()) {
            baseline = Some(label.clone());
        }
        let frame_errors = read_frame_errors_csv(&dir.join(FRAME_ERRORS_FILE))?;
        runs.push(RunErrors { label, frame_errors });
    }
    let table = build_table(&runs, baseline.as_deref())?;
    let text = render_text(&table);
    print!("{text}");
    if let Some(prefix) = &a.out {
        if let Some(parent) = prefix.parent().filter(|p| !p.as_os_str().is_empty()) {
            create_dir(parent)?;
        }
        write_file(&with_suffix(prefix, "txt"), &text)?;
        write_file(&with_suffix(prefix, "csv"), &render_csv(&table))?;
    }
    Ok(())
}

pub fn plot(a: PlotArgs) -> CmdResult {
    let pred = read_contours_csv(&a.pred)?;
    let truth = read_contours_csv(&a.truth)?;
    let find = |sets: &[vtinv::corpus::ContourSet], f: usize| {
        sets.iter().find(|c| c.frame_index == f).cloned().ok_or(Error::FrameAbsent(f))
    };
    let mut pages = Vec::with_capacity(a.frame.len());
    for &f in &a.frame {
        let (p, t) = (find(&pred, f)?, find(&truth, f)?);
        pages.push((f, render_overlay_svg(p.values(), t.values(), f, a.pixel_spacing)?));
    }
    create_dir(&a.out)?;
    for (f, svg) in pages {
        let path = a.out.join(format!("frame_{f}.svg"));
        write_file(&path, &svg)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

enum CheckTarget {
    Layer(ProbeKind),
    Network(Variant),
}

impl CheckTarget {
    fn parse(s: &str) -> Result<CheckTarget, Failure> {
        s.parse::<ProbeKind>()
            .map(CheckTarget::Layer)
            .or_else(|_| s.parse::<Variant>().map(CheckTarget::Network))
            .map_err(|_| Failure::Data(format!("unknown gradient-check target '{s}'")))
    }

    fn name(&self) -> String {
        match self {
            CheckTarget::Layer(k) => k.to_string(),
            CheckTarget::Network(v) => v.to_string(),
        }
    }
}

fn check(target: &CheckTarget, a: &GradcheckArgs) -> Result<GradCheckReport, Error> {
    match target {
        CheckTarget::Layer(kind) => {
            let mut probe = LayerProbe::new(*kind, 6, 5, a.seed);
            let sample = probe.random_sample(a.frames, a.seed + 1);
            gradient_check(&mut probe, &sample, a.eps, a.tolerance, a.coords, a.seed + 2)
        }
        CheckTarget::Network(variant) => {
            let spec = ModelSpec::new(*variant, TaskMode::Aba(Articulator::Tongue), a.hidden);
            let mut model = Model::build(spec, a.seed)?;
            let sample = Example::random(&spec, a.frames, a.seed + 1);
            gradient_check(&mut model, &sample, a.eps, a.tolerance, a.coords, a.seed + 2)
        }
    }
}

pub fn gradcheck(a: GradcheckArgs) -> CmdResult {
    let targets: Vec<CheckTarget> = match &a.only {
        Some(names) => names.iter().map(|n| CheckTarget::parse(n)).collect::<Result<_, _>>()?,
        None => ProbeKind::ALL
            .into_iter()
            .map(CheckTarget::Layer)
            .chain(Variant::ALL.into_iter().map(CheckTarget::Network))
            .collect(),
    };
    let mut failed = Vec::new();
    for target in &targets {
        let r = check(target, &a)?;
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        println!("{:<12} {:>5} coords  max rel err {:.3e}  {verdict}", target.name(), r.checked, r.max_rel_error);
        if !r.passed {
            println!(
                "  worst at {} [{}]: analytic {:.6e}, numeric {:.6e}",
                r.worst_slot, r.worst_coordinate, r.worst_pair.0, r.worst_pair.1
            );
            failed.push(target.name());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numeric(format!("gradient check failed for {}", failed.join(", "))))
    }
}
