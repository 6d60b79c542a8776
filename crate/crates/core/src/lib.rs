//! Post-dominator based consistency checking and pruning for superset
//! disassembly.
//!
//! The pipeline decodes a candidate instruction at every byte offset
//! ([`isa`]), links them into a superset CFG ([`supercfg`]), builds a
//! post-dominator forest with one virtual exit per weakly connected
//! component ([`pdt`]), and then either reports structural violations of a
//! disassembly ([`detect`]) or prunes per-offset scores into a consistent
//! instruction set ([`prune`]).
//!
//! ```
//! use pdt_disasm::{Analysis, Region, Tbc1, TruthVector};
//!
//! // NOP; NOP; HALT
//! let analysis = Analysis::new(&Tbc1, &Region::new(vec![0x90, 0x90, 0x00])).unwrap();
//! let truth = TruthVector::from_offsets(3, [0, 2]);
//! let report = analysis.detect(&truth).unwrap();
//! assert_eq!(report.nop, vec![0]);
//! ```

pub mod detect;
mod dom;
pub mod error;
pub mod isa;
pub mod masks;
pub mod pdt;
pub mod prune;
mod scc;
pub mod scores;
pub mod supercfg;

pub use detect::{
    aggregate_rates, detect_violations, truth_from_scores, Category, RateSummary, Truth,
    TruthVector, ViolationReport,
};
pub use error::{Error, Result};
pub use isa::{superset_decode, DecodedInst, Decoder, InstKind, Region, Tbc1};
pub use pdt::{brute_force_postdom, build_pdt, build_pdt_par, PostDomForest};
pub use prune::{prune, PropagationMode, PrunedResult};
pub use scc::{scc_info, SccInfo};
pub use supercfg::{build_cfg, wcc_partition, NodeClass, SupersetCfg, WccPartition};

/// A decoded region with its CFG and post-dominator forest.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub cfg: SupersetCfg,
    pub forest: PostDomForest,
}

impl Analysis {
    pub fn new(decoder: &dyn Decoder, region: &Region) -> Result<Self> {
        let cfg = build_cfg(&superset_decode(decoder, region), region.len());
        let forest = build_pdt(&cfg)?;
        Ok(Analysis { cfg, forest })
    }

    /// Like [`Analysis::new`], with components on the current rayon pool.
    pub fn new_par(decoder: &dyn Decoder, region: &Region) -> Result<Self> {
        let cfg = build_cfg(&superset_decode(decoder, region), region.len());
        let forest = build_pdt_par(&cfg)?;
        Ok(Analysis { cfg, forest })
    }

    pub fn region_len(&self) -> usize {
        self.cfg.region_len()
    }

    pub fn check_invariants(&self) -> Result<()> {
        self.cfg.check_invariants()?;
        self.forest.check_invariants(&self.cfg)
    }

    pub fn detect(&self, truth: &TruthVector) -> Result<ViolationReport> {
        detect_violations(&self.forest, &self.cfg, truth)
    }

    pub fn prune(&self, scores: &[f64], mode: PropagationMode) -> Result<PrunedResult> {
        prune(&self.forest, &self.cfg, scores, mode)
    }
}
