pub mod bench;
pub mod calibrate;
pub mod dro;
pub mod error;
pub mod frank_wolfe;
pub mod linalg;
pub mod par;
pub mod predictors;
pub mod problems;
pub mod rng;
pub mod robust;
pub mod simplex;
pub mod uncertainty;
