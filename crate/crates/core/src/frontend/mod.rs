//! Training frames, analog combining, the sensing operator, AWGN, low
//! resolution quantization and the estimation/validation split.

mod combiner;
mod partition;
mod quantizer;
mod sensing;
mod training;

pub use combiner::{build_combiners, CombinerSchedule};
pub use partition::{partition_cv, DataPartition, Subset};
pub use quantizer::{
    gaussian_mse, make_quantizer, optimal_step, quantize, received_signal_power, signal_variance, QuantizedObservation,
    QuantizerSpec, OPTIMAL_STEP,
};
pub use sensing::{assemble_sensing, receive_streams, simulate_rx, SensingOperator};
pub use training::{design_training, TrainingSchedule};
