//! Convolutional jammer suppressor: input construction, layers with
//! hand-written backward passes, ADAM training, model files.

mod adam;
mod batchnorm;
mod conv;
pub mod gradcheck;
mod input;
mod model;
mod model_io;
mod network;
mod relu;
mod tensor;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use batchnorm::{batchnorm_backward, batchnorm_forward, BatchNormParams, BnCache, BnGrads, BnMode};
pub use conv::{conv2d_backward, conv2d_forward, ColumnPadding, ConvGrads, ConvLayerParams};
pub use input::{build_input_tensor, output_to_signal, target_tensor, InputTensor};
pub use model::{denoise, TrainedModel, TrainingMeta};
pub use model_io::{load_model, save_model, MAGIC as MODEL_MAGIC, VERSION as MODEL_VERSION};
pub use network::{
    example_losses, loss, loss_gradient, network_backward, network_forward, network_predict,
    ForwardCache, Gradients, LayerCache, Mode, NetworkConfig, NetworkWeights, BN_EPSILON,
    BN_MOMENTUM, INPUT_CHANNELS, NETWORK_PADDING, OUTPUT_CHANNELS,
};
pub use relu::{relu_backward, relu_forward};
pub use tensor::{Real, Tensor3};
pub use train::{
    mean_batch_loss, prepare_examples, train, train_prepared, EpochStats, PreparedExample,
    TrainConfig,
};
