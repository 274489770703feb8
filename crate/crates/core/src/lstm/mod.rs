//! Single-layer LSTM with per-frame binary output, trained by BPTT with
//! momentum SGD and per-batch Gaussian weight noise.

mod io;
mod network;
mod params;
mod train;

pub use io::{LstmHeader, LstmModelFile, LSTM_MAGIC, LSTM_VERSION};
pub use network::{
    backward, forward, forward_from, loss, loss_and_gradient, predict_sequence,
    predict_sequence_from, ForwardCache, LstmState, SequencePrediction, PROB_FLOOR,
};
pub use params::{LstmConfig, LstmParams, CLASSES, GATES};
pub use train::{train, TrainOutcome, TrainState, Trained};
