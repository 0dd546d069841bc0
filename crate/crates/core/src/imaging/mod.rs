//! Grayscale frames for the force channel.

mod image;
mod pgm;

pub use self::image::{
    flatten_scaled, preprocess_frame, resize_nearest, to_model_input, GrayImage, CAMERA_HEIGHT,
    CAMERA_WIDTH, MODEL_HEIGHT, MODEL_WIDTH,
};
pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_pgm};
