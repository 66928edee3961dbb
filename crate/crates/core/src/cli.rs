//! Command-line front end. Every stage reads and writes inspectable files;
//! failures are reported as a JSON document on stderr.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::config::{Detector, PipelineConfig};
use crate::datacube::{load_cube, save_cube};
use crate::envelope::{abs_distance, read_envelopes_csv, write_distance_csv, write_envelopes_csv};
use crate::error::{Error, Result};
use crate::fidelity::{score_signs, select_top_k, SignGroups};
use crate::motiondetect::{mask_to_csv, segmentation_accuracy, Mdi};
use crate::pipeline::{detect_motion, process_cube};
use crate::rfrep::{write_ra_csv, write_rd_csv, write_spectrogram_csv};
use crate::seqdecode::{
    classify_mdi, default_attribute_table, dtw_template_scorer, evaluate_detection, gamma_sweep,
    run_triggers, ScoreStream, TemplateSet, TriggerMode,
};
use crate::synth::{make_sequence_scene, simulate, GroundTruth, MotionLibrary, Scene};
use crate::util::write_atomic;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "rftrigger",
    version,
    about = "FMCW radar sign-trigger pipeline"
)]
pub struct Cli {
    /// Pipeline configuration (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DetectorArg {
    Vw,
    Fixed,
    Pbc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Single,
    Double,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a scene into an RFC1 cube and its ground truth.
    Simulate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        cube: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Write a synthetic walk/sit/sign/stand sequence scene.
    MakeScene {
        /// Sequence kind, 1 to 5.
        #[arg(long)]
        kind: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Motion library (JSON); built-in when omitted.
        #[arg(long)]
        library: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Range-Doppler, micro-Doppler and range-angle products of a cube.
    Process {
        #[arg(long)]
        cube: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Segment an envelope stream into motion intervals.
    Detect {
        #[arg(long)]
        envelopes: PathBuf,
        /// Overrides the configured detector.
        #[arg(long, value_enum)]
        detector: Option<DetectorArg>,
        /// Ground truth; adds segmentation accuracy to the output.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the 0/1 mask as CSV.
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Cut class templates from labeled recordings.
    BuildTemplates {
        /// `ENVELOPES.csv,TRUTH.json` pair; repeat per recording.
        #[arg(long = "recording", required = true)]
        recordings: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-step class posteriors from envelope templates.
    Score {
        #[arg(long)]
        envelopes: PathBuf,
        #[arg(long)]
        templates: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label each motion interval by the mode of a score stream.
    Classify {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        mdis: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cumulative-score trigger detection over motion intervals.
    Trigger {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        mdis: PathBuf,
        #[arg(long)]
        events: PathBuf,
        /// Overrides the configured mode.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Ground truth; required for the report and the sweep.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, requires = "truth")]
        report: Option<PathBuf>,
        /// FRR/FAR of both detectors over the configured gamma sweep.
        #[arg(long, requires = "truth")]
        sweep: Option<PathBuf>,
    },
    /// Rank signs by native/imitation envelope similarity.
    Fidelity {
        #[arg(long)]
        manifest: PathBuf,
        /// Keep the top k signs.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write the default configuration, motion library or attribute table.
    DumpDefaults {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        library: Option<PathBuf>,
        #[arg(long)]
        attributes: Option<PathBuf>,
    },
}

fn write_json(path: &Path, mut doc: Value) -> Result<()> {
    if let Some(obj) = doc.as_object_mut() {
        obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    }
    write_atomic(path, serde_json::to_string_pretty(&doc)?.as_bytes())
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Reads a document written by [`write_json`], dropping its version tag.
fn read_versioned(path: &Path) -> Result<Value> {
    let mut doc = read_json(path)?;
    if let Some(v) = doc.as_object_mut().and_then(|o| o.remove("schema_version")) {
        if v != json!(SCHEMA_VERSION) {
            return Err(Error::Format {
                offset: 0,
                message: format!("unsupported schema_version {v}"),
            });
        }
    }
    Ok(doc)
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// MDI document written by `detect`.
#[derive(Debug, Deserialize)]
struct MdiDoc {
    step_s: f64,
    mdis: Vec<Mdi>,
}

pub fn read_mdis(path: &Path) -> Result<(f64, Vec<Mdi>)> {
    let doc: MdiDoc = serde_json::from_value(read_json(path)?)?;
    Ok((doc.step_s, doc.mdis))
}

fn check_step(stream: &ScoreStream, step_s: f64) -> Result<()> {
    if (stream.step_s() - step_s).abs() > 1e-9 {
        return Err(Error::ShapeMismatch(format!(
            "score step {} s differs from interval step {step_s} s",
            stream.step_s()
        )));
    }
    Ok(())
}

fn check_within(stream: &ScoreStream, mdis: &[Mdi]) -> Result<()> {
    match mdis.iter().find(|m| m.end_step >= stream.len()) {
        Some(m) => Err(Error::ShapeMismatch(format!(
            "interval ending at step {} exceeds the {}-step score stream",
            m.end_step,
            stream.len()
        ))),
        None => Ok(()),
    }
}

/// Fidelity manifest: per sign, envelope CSV paths per group, resolved
/// relative to the manifest's directory.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    #[serde(default)]
    #[allow(dead_code)]
    schema_version: Option<u32>,
    signs: BTreeMap<String, ManifestSign>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestSign {
    native: Vec<PathBuf>,
    imitation: Vec<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = PipelineConfig::load_or_default(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate { scene, cube, truth } => {
            let scene = Scene::load(&scene)?;
            let (c, t) = simulate(&scene, &cfg.radar)?;
            save_cube(&c, &cube)?;
            t.save(&truth)
        }
        Command::MakeScene {
            kind,
            seed,
            library,
            out,
        } => {
            let lib = match library {
                Some(p) => serde_json::from_value::<MotionLibrary>(read_versioned(&p)?)?,
                None => MotionLibrary::default(),
            };
            make_sequence_scene(kind, &lib, seed)?.save(&out)
        }
        Command::Process { cube, out_dir } => {
            let cube = load_cube(&cube)?;
            let stride = cfg.output.frame_stride;
            let p = process_cube(&cube, &cfg, cfg.output.write_ra.then_some(stride))?;
            create_dir(&out_dir)?;
            write_spectrogram_csv(&p.spectrogram, out_dir.join("spectrogram.csv"))?;
            write_envelopes_csv(&p.envelopes, out_dir.join("envelopes.csv"))?;
            write_envelopes_csv(&p.scorer_envelopes, out_dir.join("scorer_envelopes.csv"))?;
            write_distance_csv(
                &abs_distance(&p.envelopes, true),
                &p.envelopes.times_s,
                out_dir.join("distance.csv"),
            )?;
            if cfg.output.write_rd {
                let dir = out_dir.join("rd");
                create_dir(&dir)?;
                for (k, f) in p.rd_frames.iter().enumerate().step_by(stride) {
                    write_rd_csv(f, dir.join(format!("frame_{k:05}.csv")))?;
                }
            }
            if !p.ra_frames.is_empty() {
                let dir = out_dir.join("ra");
                create_dir(&dir)?;
                for (k, f) in &p.ra_frames {
                    write_ra_csv(f, dir.join(format!("frame_{k:05}.csv")))?;
                }
            }
            write_json(
                &out_dir.join("process.json"),
                json!({
                    "range_bins": p.range_bins,
                    "rd_frames": p.rd_frames.len(),
                    "ra_frames": p.ra_frames.iter().map(|f| f.0).collect::<Vec<_>>(),
                    "frame_rate_hz": 1.0 / cube.config().cpi_s(),
                    "detection_step_s": cfg.stft.hop_s,
                    "scorer_step_s": cfg.scorer_stft.hop_s,
                }),
            )
        }
        Command::Detect {
            envelopes,
            detector,
            truth,
            out,
            mask,
        } => {
            let env = read_envelopes_csv(&envelopes)?;
            let mut motion = cfg.motion;
            if let Some(d) = detector {
                motion.detector = match d {
                    DetectorArg::Vw => Detector::Vw,
                    DetectorArg::Fixed => Detector::Fixed,
                    DetectorArg::Pbc => Detector::Pbc,
                };
            }
            let det = detect_motion(&env, &motion)?;
            let mut doc = json!({
                "detector": motion.detector,
                "step_s": env.step_s(),
                "mdis": det.mdis,
            });
            if let Some(t) = truth {
                let truth = GroundTruth::load(&t)?;
                let mut m = det.mask.clone();
                m.resize(truth.mask.len(), false);
                doc["accuracy"] = json!(segmentation_accuracy(&m, &truth.mask)?);
            }
            if let Some(p) = mask {
                write_atomic(&p, mask_to_csv(&det.mask).as_bytes())?;
            }
            write_json(&out, doc)
        }
        Command::BuildTemplates { recordings, out } => {
            let mut loaded = Vec::new();
            for r in &recordings {
                let (e, t) = r.split_once(',').ok_or_else(|| {
                    Error::invalid(format!("recording `{r}` is not ENVELOPES,TRUTH"))
                })?;
                let truth = GroundTruth::load(t)?;
                let segs: Vec<(String, f64, f64)> = truth
                    .segments
                    .iter()
                    .map(|s| (s.label.clone(), s.start_s, s.end_s))
                    .collect();
                loaded.push((read_envelopes_csv(e)?, segs));
            }
            let inputs: Vec<_> = loaded.iter().map(|(e, s)| (e, s.as_slice())).collect();
            TemplateSet::from_segments(&inputs, cfg.scorer.max_templates_per_class)?.save(&out)
        }
        Command::Score {
            envelopes,
            templates,
            out,
        } => {
            let env = read_envelopes_csv(&envelopes)?;
            let set = TemplateSet::load(&templates)?;
            dtw_template_scorer(&env, &set, &cfg.scorer)?.write_csv(&out)
        }
        Command::Classify { scores, mdis, out } => {
            let stream = ScoreStream::read_csv(&scores)?;
            let (step, mdis) = read_mdis(&mdis)?;
            check_step(&stream, step)?;
            check_within(&stream, &mdis)?;
            let labels: Vec<Value> = mdis
                .iter()
                .map(|m| classify_mdi(&stream, m).map(|l| json!({ "mdi": m, "label": l })))
                .collect::<Result<_>>()?;
            write_json(&out, json!({ "classifications": labels }))
        }
        Command::Trigger {
            scores,
            mdis,
            events,
            mode,
            truth,
            report,
            sweep,
        } => {
            let stream = ScoreStream::read_csv(&scores)?;
            let (step, mdis) = read_mdis(&mdis)?;
            check_step(&stream, step)?;
            check_within(&stream, &mdis)?;
            let mode = match mode {
                Some(ModeArg::Single) => TriggerMode::Single,
                Some(ModeArg::Double) => TriggerMode::Double,
                None => cfg.trigger.mode,
            };
            let csa = &cfg.trigger.csa;
            let fired = run_triggers(&stream, &mdis, csa, mode)?;
            write_json(
                &events,
                json!({ "mode": mode, "config": csa, "events": fired }),
            )?;
            if let Some(t) = truth {
                let labeled = GroundTruth::load(&t)?.labeled_mdis();
                if let Some(p) = report {
                    let r = evaluate_detection(&fired, &labeled, &csa.trigger_class)?;
                    write_json(
                        &p,
                        json!({ "mode": mode, "trigger_class": csa.trigger_class, "report": r }),
                    )?;
                }
                if let Some(p) = sweep {
                    let corpus = vec![(stream, mdis, labeled)];
                    let rows = gamma_sweep(
                        &corpus,
                        csa,
                        &cfg.trigger.sweep_gammas,
                        cfg.trigger.sweep_low_ratio,
                    )?;
                    let mut text = String::from(
                        "gamma,gamma_low,single_frr,single_far,single_dr,double_frr,double_far,double_dr\n",
                    );
                    for r in rows {
                        text.push_str(&format!(
                            "{},{},{},{},{},{},{},{}\n",
                            r.gamma,
                            r.gamma_low,
                            r.single.frr,
                            r.single.far,
                            r.single.detection_rate,
                            r.double.frr,
                            r.double.far,
                            r.double.detection_rate
                        ));
                    }
                    write_atomic(&p, text.as_bytes())?;
                }
            }
            Ok(())
        }
        Command::Fidelity {
            manifest,
            k,
            out,
            json: json_out,
        } => {
            let doc: Manifest = serde_json::from_value(read_json(&manifest)?)?;
            let base = manifest.parent().unwrap_or(Path::new("."));
            let load = |paths: &[PathBuf]| -> Result<Vec<_>> {
                paths
                    .iter()
                    .map(|p| read_envelopes_csv(base.join(p)))
                    .collect()
            };
            let mut signs = BTreeMap::new();
            for (name, s) in &doc.signs {
                signs.insert(
                    name.clone(),
                    SignGroups {
                        native: load(&s.native)?,
                        imitation: load(&s.imitation)?,
                    },
                );
            }
            let mut table = score_signs(&signs)?;
            if let Some(k) = k {
                let keep = select_top_k(&table, k)?;
                table.rows.retain(|r| keep.contains(&r.sign));
            }
            write_atomic(&out, table.to_csv().as_bytes())?;
            if let Some(p) = json_out {
                let ranking = select_top_k(&table, table.rows.len())?;
                write_json(&p, json!({ "ranking": ranking, "rows": table.rows }))?;
            }
            Ok(())
        }
        Command::DumpDefaults {
            out,
            library,
            attributes,
        } => {
            let text = cfg.to_toml()?;
            match &out {
                Some(p) => write_atomic(p, text.as_bytes())?,
                None if library.is_none() && attributes.is_none() => print!("{text}"),
                None => {}
            }
            if let Some(p) = library {
                write_json(&p, serde_json::to_value(MotionLibrary::default())?)?;
            }
            if let Some(p) = attributes {
                write_json(&p, json!({ "classes": default_attribute_table() }))?;
            }
            Ok(())
        }
    }
}

/// The JSON document printed on stderr for a failed command.
pub fn error_document(kind: &str, message: &str) -> String {
    json!({ "schema_version": SCHEMA_VERSION, "error": { "kind": kind, "message": message } })
        .to_string()
}

/// Parses `args`, runs the command, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            eprintln!("{}", error_document("usage", e.to_string().trim()));
            return 2;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_document(e.kind(), &e.to_string()));
            e.exit_code()
        }
    }
}
