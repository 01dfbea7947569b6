//! Task paradigms, HRF regressors, frame selection, signal-set assembly and
//! synthetic phantoms.

mod paradigm;
mod phantom;
mod sets;

pub use paradigm::{
    build_regressor, hrf, load_paradigm_dir, parse_ev, select_frames, Paradigm, Regressor, TaskParadigms,
    DEFAULT_THRESHOLD, HRF_SUPPORT, REGRESSOR_STEP,
};
pub use phantom::{
    make_folded_sheet, make_shell, make_signal, uv_sphere, FoldedSheet, Phantom, SignalKind,
};
pub use sets::{assemble_sets, AssembledSets, ConditionSelection};
