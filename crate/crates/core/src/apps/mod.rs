//! Applications built on saliency maps: aligning cuts between 360 video
//! segments, picking thumbnails, viewport synopsis paths and saliency-guided
//! compression.

mod align;
mod compress;
mod thumbnail;

pub use align::{align_cut, CutAlignment};
pub use compress::{blend_alpha, compress, cube_face_res, down_up, CompressParams, CompressStats, CLAIMED_RETENTION};
pub use thumbnail::{synopsis, thumbnail, SynopsisParams, Thumbnail, ThumbnailParams, ViewportPath};
