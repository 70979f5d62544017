use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{rng_at, stream};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    TopLeft,
    TopRight,
    BottomLeft,
    #[default]
    BottomRight,
}

/// A solid patch stamped into a corner of the image, plus the label the
/// backdoor should map it to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerSpec {
    #[serde(default)]
    pub anchor: Anchor,
    pub patch_height: usize,
    pub patch_width: usize,
    pub pixel_value: f64,
    pub target_label: usize,
}

impl Default for TriggerSpec {
    /// 3×3 white patch, bottom-right corner, target class 0.
    fn default() -> Self {
        Self {
            anchor: Anchor::BottomRight,
            patch_height: 3,
            patch_width: 3,
            pixel_value: 1.0,
            target_label: 0,
        }
    }
}

impl TriggerSpec {
    pub fn validate(&self, height: usize, width: usize, num_classes: usize) -> Result<()> {
        if self.patch_height > height || self.patch_width > width {
            return Err(Error::InvalidArgument(format!(
                "{}x{} patch does not fit a {height}x{width} image",
                self.patch_height, self.patch_width
            )));
        }
        if !(0.0..=1.0).contains(&self.pixel_value) {
            return Err(Error::InvalidArgument(format!(
                "trigger pixel value {} outside [0, 1]",
                self.pixel_value
            )));
        }
        if self.target_label >= num_classes {
            return Err(Error::InvalidArgument(format!(
                "target label {} outside [0, {num_classes})",
                self.target_label
            )));
        }
        Ok(())
    }

    /// Top-left pixel of the patch.
    fn origin(&self, height: usize, width: usize) -> (usize, usize) {
        let bottom = height - self.patch_height;
        let right = width - self.patch_width;
        match self.anchor {
            Anchor::TopLeft => (0, 0),
            Anchor::TopRight => (0, right),
            Anchor::BottomLeft => (bottom, 0),
            Anchor::BottomRight => (bottom, right),
        }
    }

    /// Stamps the patch in place into an `H × W × C` image.
    pub fn stamp(&self, image: &mut [f64], height: usize, width: usize, channels: usize) {
        let (r0, c0) = self.origin(height, width);
        for r in r0..r0 + self.patch_height {
            for c in c0..c0 + self.patch_width {
                let base = (r * width + c) * channels;
                image[base..base + channels].fill(self.pixel_value);
            }
        }
    }
}

/// Returns a copy of `image` (`H × W × C`) with the trigger patch applied.
pub fn apply_trigger(
    image: &[f64],
    dims: [usize; 3],
    spec: &TriggerSpec,
) -> Result<Vec<f64>> {
    let [h, w, c] = dims;
    if image.len() != h * w * c {
        return Err(Error::Shape(format!(
            "image of {} values is not {h}x{w}x{c}",
            image.len()
        )));
    }
    if spec.patch_height > h || spec.patch_width > w {
        return Err(Error::InvalidArgument("trigger patch exceeds image".into()));
    }
    let mut out = image.to_vec();
    spec.stamp(&mut out, h, w, c);
    Ok(out)
}

/// Every image triggered, labels untouched. This is the ASR probe set.
pub fn triggered_copy(data: &Dataset, spec: &TriggerSpec) -> Dataset {
    let mut out = data.clone();
    let (h, w, c) = (data.height(), data.width(), data.channels());
    for i in 0..out.len() {
        spec.stamp(out.image_mut(i), h, w, c);
    }
    out
}

/// Triggers a seeded `⌈fraction·N⌉` subset and relabels it to the target.
pub fn poison_dataset(
    data: &Dataset,
    spec: &TriggerSpec,
    fraction: f64,
    seed: u64,
) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "poison fraction {fraction} outside [0, 1]"
        )));
    }
    spec.validate(data.height(), data.width(), data.num_classes())?;
    let count = (fraction * data.len() as f64).ceil() as usize;
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng_at(seed, &[stream::POISON]));
    let mut out = data.clone();
    let (h, w, c) = (data.height(), data.width(), data.channels());
    for &i in &order[..count.min(data.len())] {
        spec.stamp(out.image_mut(i), h, w, c);
        out.labels_mut()[i] = spec.target_label;
    }
    Ok(out)
}
