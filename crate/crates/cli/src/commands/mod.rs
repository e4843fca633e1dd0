pub mod causal;
pub mod classify;
pub mod ood_eval;
pub mod pi_eval;
pub mod synth;
pub mod theorem1;
