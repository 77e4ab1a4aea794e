//! Meyer wavelet and the tabulated fractional-primitive kernels built from it.

mod io;
mod kernel;
mod meyer;
mod pairing;

pub use io::{read_table, write_table, write_table_csv, FORMAT_VERSION};
pub(crate) use kernel::lagrange4;
pub use kernel::{
    build_kernel_table, eval_kernel, kernel_column, spectral_factor, KernelKind, KernelTable, ThetaGrid, MAX_ORDER,
};
pub use meyer::{build_meyer_wavelet, MeyerWavelet, MeyerWindow, RING_HI, RING_LO};
pub use pairing::{verify_kernel_pairing, verify_kernel_pairing_with, PairingOptions};


use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the kernel tables used by the field engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisConfig {
    pub window: MeyerWindow,
    pub theta: ThetaGrid,
    pub y_max: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig { window: MeyerWindow::default(), theta: ThetaGrid::default(), y_max: 256.0 }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        self.theta.validate()?;
        let dy = self.window.dy();
        let ny = self.y_max / dy;
        if !(self.y_max > 0.0) || (ny - ny.round()).abs() > 1e-9 * ny.max(1.0) {
            return Err(Error::OutOfRange(format!("y_max {} is not a positive multiple of the step {dy}", self.y_max)));
        }
        if 4.0 * self.y_max > self.window.period() {
            return Err(Error::GridTooCoarse(format!("y_max {} exceeds a quarter of the period {}", self.y_max, self.window.period())));
        }
        Ok(())
    }

    /// Reduced grids for quick runs and tests.
    pub fn coarse() -> Self {
        SynthesisConfig {
            window: MeyerWindow { smoothing_order: 3, freq_samples: 1 << 15, freq_halfwidth: 32.0 * std::f64::consts::PI },
            theta: ThetaGrid::default(),
            y_max: 64.0,
        }
    }
}

/// Highest theta-derivative kept for the synthesis kernel.
pub const BANK_MAX_DTHETA: usize = 2;

/// The synthesis kernel and its first two theta-derivatives, plus the dual kernel.
#[derive(Debug, Clone)]
pub struct KernelBank {
    pub config: SynthesisConfig,
    pub synthesis: Vec<KernelTable>,
    pub dual: KernelTable,
}

impl KernelBank {
    pub fn build(config: SynthesisConfig) -> Result<Self> {
        config.validate()?;
        let wavelet = build_meyer_wavelet(config.window)?;
        let synthesis = (0..=BANK_MAX_DTHETA)
            .map(|n| build_kernel_table(&wavelet, KernelKind::Synthesis, 0, n, config.y_max, config.theta))
            .collect::<Result<Vec<_>>>()?;
        let dual = build_kernel_table(&wavelet, KernelKind::Dual, 0, 0, config.y_max, config.theta)?;
        Ok(KernelBank { config, synthesis, dual })
    }

    /// Assembles a bank from previously built tables, checking that their grids agree.
    pub fn from_tables(config: SynthesisConfig, synthesis: Vec<KernelTable>, dual: KernelTable) -> Result<Self> {
        if synthesis.len() != BANK_MAX_DTHETA + 1 {
            return Err(Error::Format(format!("expected {} synthesis tables", BANK_MAX_DTHETA + 1)));
        }
        for (n, t) in synthesis.iter().enumerate() {
            if t.which != KernelKind::Synthesis || t.dtheta_order != n || t.dy_order != 0 {
                return Err(Error::Format(format!("synthesis table {n} has the wrong kind or order")));
            }
        }
        if dual.which != KernelKind::Dual || dual.dtheta_order != 0 || dual.dy_order != 0 {
            return Err(Error::Format("dual table has the wrong kind or order".into()));
        }
        for t in synthesis.iter().chain(std::iter::once(&dual)) {
            if t.ny_half != synthesis[0].ny_half || t.dy != synthesis[0].dy || t.theta != synthesis[0].theta {
                return Err(Error::Format("tables are on different grids".into()));
            }
        }
        Ok(KernelBank { config, synthesis, dual })
    }

    pub fn table(&self, n: usize) -> Result<&KernelTable> {
        self.synthesis
            .get(n)
            .ok_or_else(|| Error::UnsupportedOrder(format!("theta-derivative order {n} > {BANK_MAX_DTHETA}")))
    }

    pub fn theta_range(&self) -> (f64, f64) {
        (self.config.theta.lo, self.config.theta.hi)
    }
}
