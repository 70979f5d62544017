use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Labeled images stored `N × H × W × C`, pixels in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    height: usize,
    width: usize,
    channels: usize,
    num_classes: usize,
    pixels: Vec<f64>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        num_classes: usize,
        pixels: Vec<f64>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        let per_image = height * width * channels;
        if per_image == 0 {
            return Err(Error::Shape("images must have positive size".into()));
        }
        if pixels.len() != labels.len() * per_image {
            return Err(Error::Shape(format!(
                "{} pixel values for {} images of {height}x{width}x{channels}",
                pixels.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} outside [0, {num_classes})"
            )));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument("pixels must lie in [0, 1]".into()));
        }
        Ok(Self {
            height,
            width,
            channels,
            num_classes,
            pixels,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// `[C, H, W]`, the per-sample shape models consume.
    pub fn sample_shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    pub fn image_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    /// Image `i` in `H × W × C` order.
    pub fn image(&self, i: usize) -> &[f64] {
        let len = self.image_len();
        &self.pixels[i * len..(i + 1) * len]
    }

    pub(crate) fn image_mut(&mut self, i: usize) -> &mut [f64] {
        let len = self.image_len();
        &mut self.pixels[i * len..(i + 1) * len]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub(crate) fn labels_mut(&mut self) -> &mut [usize] {
        &mut self.labels
    }

    /// Images `indices` as a `[n, C, H, W]` batch.
    pub fn batch(&self, indices: &[usize]) -> Tensor {
        let (h, w, c) = (self.height, self.width, self.channels);
        let mut data = Vec::with_capacity(indices.len() * h * w * c);
        for &i in indices {
            let img = self.image(i);
            for ch in 0..c {
                for p in 0..h * w {
                    data.push(img[p * c + ch]);
                }
            }
        }
        Tensor::new(vec![indices.len(), c, h, w], data).expect("sizes agree")
    }

    pub fn batch_labels(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.labels[i]).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut pixels = Vec::with_capacity(indices.len() * self.image_len());
        for &i in indices {
            pixels.extend_from_slice(self.image(i));
        }
        Dataset {
            height: self.height,
            width: self.width,
            channels: self.channels,
            num_classes: self.num_classes,
            pixels,
            labels: self.batch_labels(indices),
        }
    }

    /// Count of samples per class.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.num_classes];
        for &y in &self.labels {
            h[y] += 1;
        }
        h
    }
}
