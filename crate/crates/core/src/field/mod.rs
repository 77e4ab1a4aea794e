//! Evaluation of the random wavelet series, the mBm and the critical process `Y`.

mod engine;
mod recovery;

pub use engine::{Component, FieldConfig, FieldEngine, TruncationBound};
pub use recovery::{recover_coefficient, RecoveryOptions};

#[cfg(test)]
pub(crate) fn test_bank() -> std::sync::Arc<crate::wavelet::KernelBank> {
    use std::sync::{Arc, OnceLock};
    static BANK: OnceLock<Arc<crate::wavelet::KernelBank>> = OnceLock::new();
    BANK.get_or_init(|| Arc::new(crate::wavelet::KernelBank::build(Default::default()).unwrap())).clone()
}
