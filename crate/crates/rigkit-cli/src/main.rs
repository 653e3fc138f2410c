//! rigkit command line: augment, undistort, stitch, evaluate, preview.
//!
//! Exit codes: 0 on success, 1 on a fatal configuration or I/O error,
//! 2 on partial completion (some items skipped; counts in the summary).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rigkit::pipeline;

#[derive(Parser)]
#[command(name = "rigkit", version, about = "Deterministic multi-camera image toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expand a dataset by running an augmentation policy over a manifest.
    Augment {
        /// Manifest file: one `image_path[,label_path]` per line.
        #[arg(long)]
        manifest: PathBuf,
        /// Policy file (TOML).
        #[arg(long)]
        policy: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Master seed; fixes every sampled parameter.
        #[arg(long)]
        seed: u64,
        /// Worker threads (default: one per core).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Full-frame undistortion of one camera's frame.
    Undistort {
        /// Rig file (TOML).
        #[arg(long)]
        rig: PathBuf,
        /// Camera id within the rig.
        #[arg(long)]
        camera: String,
        /// Input frame.
        #[arg(long = "in")]
        input: PathBuf,
        /// Output image path.
        #[arg(long)]
        out: PathBuf,
        /// Output validity mask path.
        #[arg(long)]
        mask: PathBuf,
    },
    /// Undistort and composite three frames into a cylindrical panorama.
    Stitch {
        /// Rig file with exactly three cameras, in left/front/right order.
        #[arg(long)]
        rig: PathBuf,
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        front: PathBuf,
        #[arg(long)]
        right: PathBuf,
        /// Output prefix: writes `<prefix>.png`, `<prefix>_mask.png`,
        /// `<prefix>_contrib_<id>.png` and optionally `<prefix>_labels.png`.
        #[arg(long)]
        out: String,
        /// Label frames in the same left/front/right order.
        #[arg(long, num_args = 3, value_names = ["LEFT", "FRONT", "RIGHT"])]
        labels: Option<Vec<PathBuf>>,
    },
    /// Score predicted label maps against ground truth.
    Evaluate {
        /// Directory of ground-truth label PNGs.
        #[arg(long)]
        gt: PathBuf,
        /// Directory of prediction PNGs with matching filenames.
        #[arg(long)]
        pred: PathBuf,
        /// Class table file (TOML).
        #[arg(long)]
        classes: PathBuf,
        /// Optional remap table applied to both sides.
        #[arg(long)]
        remap: Option<PathBuf>,
        /// Write machine-readable key=value records here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Tile images into a single montage PNG.
    Preview {
        /// Output path.
        #[arg(long)]
        out: PathBuf,
        /// Images per row.
        #[arg(long)]
        columns: usize,
        /// Input images, tiled left-to-right, top-to-bottom.
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> rigkit::Result<ExitCode> {
    match cli.command {
        Command::Augment {
            manifest,
            policy,
            out,
            seed,
            workers,
        } => {
            let manifest = pipeline::Manifest::load(&manifest)?;
            let mut policy = pipeline::AugPolicy::load(&policy)?;
            policy.master_seed = seed;
            let summary = pipeline::run_augment(&manifest, &policy, &out, workers)?;
            println!(
                "wrote {} outputs to {} (log: {})",
                summary.written,
                out.display(),
                summary.log_path.display()
            );
            if summary.skipped.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                println!("skipped {} records:", summary.skipped.len());
                for reason in &summary.skipped {
                    println!("  {reason}");
                }
                Ok(ExitCode::from(2))
            }
        }
        Command::Undistort {
            rig,
            camera,
            input,
            out,
            mask,
        } => {
            let intr = pipeline::run_undistort(&rig, &camera, &input, &out, &mask)?;
            println!(
                "undistorted '{camera}' onto a {}x{} canvas (cx={:.2}, cy={:.2})",
                intr.width, intr.height, intr.cx, intr.cy
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Stitch {
            rig,
            left,
            front,
            right,
            out,
            labels,
        } => {
            let label_paths: Option<[PathBuf; 3]> =
                labels.map(|v| v.try_into().expect("clap enforces three label paths"));
            let summary =
                pipeline::run_stitch(&rig, &[left, front, right], &out, label_paths.as_ref())?;
            println!(
                "stitched {}x{} panorama, mask-true span {:.1} degrees",
                summary.canvas_size.0, summary.canvas_size.1, summary.theta_span_deg
            );
            println!("  panorama: {}", summary.panorama.display());
            println!("  mask:     {}", summary.mask.display());
            for c in &summary.contributions {
                println!("  contrib:  {}", c.display());
            }
            if let Some(l) = &summary.labels {
                println!("  labels:   {}", l.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate {
            gt,
            pred,
            classes,
            remap,
            report,
        } => {
            let result = pipeline::run_evaluate(
                &gt,
                &pred,
                &classes,
                remap.as_deref(),
                report.as_deref(),
            )?;
            print!("{}", result.text);
            if report.is_none() {
                print!("{}", result.records);
            }
            println!("pairs evaluated: {}", result.pairs);
            if result.skipped.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                println!("skipped {} pairs:", result.skipped.len());
                for reason in &result.skipped {
                    println!("  {reason}");
                }
                Ok(ExitCode::from(2))
            }
        }
        Command::Preview {
            out,
            columns,
            images,
        } => {
            pipeline::run_preview(&images, &out, columns)?;
            println!("wrote montage of {} images to {}", images.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
