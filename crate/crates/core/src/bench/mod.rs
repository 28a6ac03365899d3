//! Desk-scale training problems with analytic gradients, the warmup-cosine
//! learning-rate schedule, a deterministic training loop with CSV telemetry,
//! and the ablation experiments built on them.

mod experiments;
mod gradcheck;
mod logreg;
mod mlp;
mod problem;
mod quadratic;
mod record;
mod schedule;
mod suite;
mod train;

pub use experiments::{
    beta1_ablation, clip_ablation, guidance_ablation, median, parity, Beta1Ablation, ClipAblation, GuidanceAblation,
    Parity, CLIP_WIN_RATE, GUIDANCE_TOLERANCE, PARITY_TOLERANCE, THRESHOLD_FACTOR, THRESHOLD_WINDOW,
};
pub use gradcheck::{finite_diff_check, MIN_COORDINATES};
pub use logreg::{Logreg, LogregSpec};
pub use mlp::{Mlp, MlpSpec};
pub use problem::Problem;
pub use quadratic::{Curvature, Offset, Quadratic, QuadraticSpec};
pub use record::{read_csv, write_csv, CsvRow, ParamTelemetry, TrainRecord};
pub use schedule::{lr_at, LrSchedule};
pub use suite::{bench_config, default_peak_lr, default_schedule, default_steps, ProblemKind, ProblemSpec, Setup};
pub use train::{run_training, run_training_with, steps_to_threshold, Divergence, TrainOptions, TrainRun, DIVERGENCE_LOSS};
