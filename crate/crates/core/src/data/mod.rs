//! Images, masks, file I/O and the synthetic dataset.

mod image;
mod masks;
mod netpbm;
mod toyshapes;

pub use image::{apply_mask, composite, mean_fill, montage, Image, Mask};
pub use masks::{gen_mask_bernoulli, gen_mask_box, gen_mask_half, gen_mask_stroke, HalfSide, MaskFamily};
pub use netpbm::{
    byte_to_unit, decode_image, decode_mask, encode_image, encode_mask, load_image, load_mask, save_image,
    save_mask, unit_to_byte,
};
pub use toyshapes::{gen_toyshapes, toyshape, DatasetSpec, Palette};
