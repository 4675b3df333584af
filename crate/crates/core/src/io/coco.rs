//! COCO-style object annotations, reduced to what chip planning needs.

use std::collections::BTreeMap;
use std::io::Read;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::BBox;

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub file_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CocoAnnotation {
    pub image_id: u64,
    /// `[x, y, width, height]`.
    pub bbox: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CocoDataset {
    pub images: Vec<CocoImage>,
    #[serde(default)]
    pub annotations: Vec<CocoAnnotation>,
}

/// One image with its object boxes in corner form.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedImage {
    pub image: CocoImage,
    pub objects: Vec<BBox>,
}

impl CocoDataset {
    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_reader(reader);
        serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let field = e.path().to_string();
            Error::stream(field, e.into_inner().to_string())
        })
    }

    /// Groups annotations by image, in image-id order. Annotations naming an
    /// unknown image, degenerate boxes and non-positive image sizes are errors.
    pub fn images(&self) -> Result<Vec<AnnotatedImage>> {
        let mut by_id: BTreeMap<u64, AnnotatedImage> = BTreeMap::new();
        for (i, img) in self.images.iter().enumerate() {
            if !(img.width > 0.0 && img.height > 0.0 && img.width.is_finite() && img.height.is_finite()) {
                return Err(Error::stream(format!("images[{i}]"), "image size must be positive"));
            }
            let prev = by_id.insert(
                img.id,
                AnnotatedImage {
                    image: img.clone(),
                    objects: Vec::new(),
                },
            );
            if prev.is_some() {
                return Err(Error::stream(format!("images[{i}].id"), format!("duplicate image id {}", img.id)));
            }
        }
        for (i, ann) in self.annotations.iter().enumerate() {
            let [x, y, w, h] = ann.bbox;
            let b = BBox::from_xywh(x, y, w, h);
            if !(w > 0.0 && h > 0.0 && b.is_valid()) {
                return Err(Error::stream(format!("annotations[{i}].bbox"), "box must have positive size"));
            }
            by_id
                .get_mut(&ann.image_id)
                .ok_or_else(|| {
                    Error::stream(
                        format!("annotations[{i}].image_id"),
                        format!("unknown image id {}", ann.image_id),
                    )
                })?
                .objects
                .push(b);
        }
        Ok(by_id.into_values().collect())
    }
}
