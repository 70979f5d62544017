use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Whether BatchNorm normalizes with batch statistics (and reports them for
/// the running-average update) or with its running statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Trainable,
    /// BatchNorm running statistics: averaged with the rest of the state but
    /// never touched by gradient steps.
    Buffer,
}

/// Fully connected layer, `weights` is `out_dim × in_dim` row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// 2-D convolution over `[C, H, W]` inputs. `filters` is
/// `out × in × kh × kw` row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub filters: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub channels: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub eps: f64,
    pub momentum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    Dense(Dense),
    Conv2d(Conv2d),
    BatchNorm(BatchNorm),
    Relu,
    AvgPool { window: usize },
    Flatten,
}

/// Per-channel statistics of one training-mode BatchNorm forward.
#[derive(Clone, Debug, PartialEq)]
pub struct BnStats {
    pub mean: Vec<f64>,
    /// Biased (population) variance, the one used to normalize.
    pub var: Vec<f64>,
    /// Elements per channel that entered the statistics.
    pub count: usize,
}

impl Dense {
    pub fn new(in_dim: usize, out_dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(Error::Shape(format!(
                "dense {in_dim}->{out_dim} got {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
        })
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.weights[k * self.in_dim..(k + 1) * self.in_dim]
    }
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        stride: usize,
        padding: usize,
        filters: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if stride == 0 {
            return Err(Error::Shape("conv stride must be positive".into()));
        }
        if filters.len() != out_channels * in_channels * kernel_h * kernel_w
            || bias.len() != out_channels
        {
            return Err(Error::Shape(format!(
                "conv {in_channels}->{out_channels} {kernel_h}x{kernel_w} got {} filter values and {} biases",
                filters.len(),
                bias.len()
            )));
        }
        Ok(Self {
            in_channels,
            out_channels,
            kernel_h,
            kernel_w,
            stride,
            padding,
            filters,
            bias,
        })
    }

    pub fn filter_len(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    /// Weights of output channel `k`, laid out `in × kh × kw`.
    pub fn filter(&self, k: usize) -> &[f64] {
        let len = self.filter_len();
        &self.filters[k * len..(k + 1) * len]
    }

    fn out_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let ph = h + 2 * self.padding;
        let pw = w + 2 * self.padding;
        if ph < self.kernel_h || pw < self.kernel_w {
            return Err(Error::Shape(format!(
                "conv kernel {}x{} larger than padded input {ph}x{pw}",
                self.kernel_h, self.kernel_w
            )));
        }
        Ok((
            (ph - self.kernel_h) / self.stride + 1,
            (pw - self.kernel_w) / self.stride + 1,
        ))
    }
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            eps: 1e-5,
            momentum: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.channels;
        if self.gamma.len() != c
            || self.beta.len() != c
            || self.running_mean.len() != c
            || self.running_var.len() != c
        {
            return Err(Error::Shape(format!("batchnorm vectors must have length {c}")));
        }
        if self.eps <= 0.0 {
            return Err(Error::InvalidArgument("batchnorm eps must be positive".into()));
        }
        if self.running_var.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument(
                "batchnorm running_var must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// `√(running_var_k + eps)`, the denominator of the inference transform.
    pub fn sigma(&self, k: usize) -> f64 {
        (self.running_var[k] + self.eps).sqrt()
    }
}

impl Layer {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Conv2d(_) => "conv2d",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Relu => "relu",
            Layer::AvgPool { .. } => "avgpool",
            Layer::Flatten => "flatten",
        }
    }

    pub fn is_parametric(&self) -> bool {
        matches!(self, Layer::Dense(_) | Layer::Conv2d(_) | Layer::BatchNorm(_))
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            Layer::Dense(d) => {
                if input != [d.in_dim] {
                    return Err(Error::Shape(format!(
                        "dense expects [{}], got {input:?}",
                        d.in_dim
                    )));
                }
                Ok(vec![d.out_dim])
            }
            Layer::Conv2d(c) => match input {
                &[ch, h, w] if ch == c.in_channels => {
                    let (oh, ow) = c.out_hw(h, w)?;
                    Ok(vec![c.out_channels, oh, ow])
                }
                _ => Err(Error::Shape(format!(
                    "conv expects [{}, H, W], got {input:?}",
                    c.in_channels
                ))),
            },
            Layer::BatchNorm(b) => {
                if input.first() != Some(&b.channels) {
                    return Err(Error::Shape(format!(
                        "batchnorm expects {} channels, got {input:?}",
                        b.channels
                    )));
                }
                Ok(input.to_vec())
            }
            Layer::Relu => Ok(input.to_vec()),
            Layer::AvgPool { window } => match input {
                &[c, h, w] if *window > 0 && h >= *window && w >= *window => {
                    Ok(vec![c, h / window, w / window])
                }
                _ => Err(Error::Shape(format!(
                    "avgpool {window} cannot pool {input:?}"
                ))),
            },
            Layer::Flatten => Ok(vec![input.iter().product()]),
        }
    }

    /// Forward over a batch `[N, ...]`. Training-mode BatchNorm also returns
    /// the batch statistics it normalized with.
    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<(Tensor, Option<BnStats>)> {
        let n = x.shape()[0];
        let sample = &x.shape()[1..];
        let out_sample = self.output_shape(sample)?;
        let mut out_shape = vec![n];
        out_shape.extend_from_slice(&out_sample);
        match self {
            Layer::Dense(d) => {
                let mut out = Vec::with_capacity(n * d.out_dim);
                for i in 0..n {
                    let xi = x.row(i);
                    for k in 0..d.out_dim {
                        out.push(d.bias[k] + dot(d.row(k), xi));
                    }
                }
                Ok((Tensor::new(out_shape, out)?, None))
            }
            Layer::Conv2d(c) => Ok((conv_forward(c, x, &out_shape), None)),
            Layer::BatchNorm(b) => {
                let spatial: usize = sample[1..].iter().product();
                let stats = match mode {
                    Mode::Train => Some(batch_stats(x, b.channels, spatial)),
                    Mode::Eval => None,
                };
                let (mean, var) = match &stats {
                    Some(s) => (&s.mean, &s.var),
                    None => (&b.running_mean, &b.running_var),
                };
                let mut out = x.clone();
                let data = out.data_mut();
                for i in 0..n {
                    for ch in 0..b.channels {
                        let inv = 1.0 / (var[ch] + b.eps).sqrt();
                        let scale = b.gamma[ch] * inv;
                        let shift = b.beta[ch] - mean[ch] * scale;
                        let base = (i * b.channels + ch) * spatial;
                        for v in &mut data[base..base + spatial] {
                            *v = *v * scale + shift;
                        }
                    }
                }
                Ok((out, stats))
            }
            Layer::Relu => {
                let mut out = x.clone();
                for v in out.data_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                Ok((out, None))
            }
            Layer::AvgPool { window } => Ok((avgpool_forward(*window, x, &out_shape), None)),
            Layer::Flatten => Ok((x.clone().reshape(out_shape)?, None)),
        }
    }

    /// Backpropagates `grad_out` through the layer. `x` is the input the
    /// forward saw; `stats` must be the training-mode statistics when the
    /// forward ran in [`Mode::Train`], `None` for inference mode. Returns the
    /// input gradient and one gradient per trainable parameter, in
    /// [`Layer::params`] order.
    pub fn backward(
        &self,
        x: &Tensor,
        grad_out: &Tensor,
        stats: Option<&BnStats>,
    ) -> (Tensor, Vec<Vec<f64>>) {
        let n = x.shape()[0];
        match self {
            Layer::Dense(d) => {
                let mut gx = Tensor::zeros(x.shape().to_vec());
                let mut gw = vec![0.0; d.weights.len()];
                let mut gb = vec![0.0; d.out_dim];
                for i in 0..n {
                    let xi = x.row(i);
                    let gi = grad_out.row(i);
                    let gxi = &mut gx.data_mut()[i * d.in_dim..(i + 1) * d.in_dim];
                    for k in 0..d.out_dim {
                        let g = gi[k];
                        if g == 0.0 {
                            continue;
                        }
                        gb[k] += g;
                        let row = d.row(k);
                        let gw_row = &mut gw[k * d.in_dim..(k + 1) * d.in_dim];
                        for j in 0..d.in_dim {
                            gw_row[j] += g * xi[j];
                            gxi[j] += g * row[j];
                        }
                    }
                }
                (gx, vec![gw, gb])
            }
            Layer::Conv2d(c) => conv_backward(c, x, grad_out),
            Layer::BatchNorm(b) => {
                let spatial: usize = x.shape()[2..].iter().product();
                let mut gx = Tensor::zeros(x.shape().to_vec());
                let mut gg = vec![0.0; b.channels];
                let mut gbeta = vec![0.0; b.channels];
                let xd = x.data();
                let gd = grad_out.data();
                for ch in 0..b.channels {
                    let (mean, var) = match stats {
                        Some(s) => (s.mean[ch], s.var[ch]),
                        None => (b.running_mean[ch], b.running_var[ch]),
                    };
                    let inv = 1.0 / (var + b.eps).sqrt();
                    let mut sum_g = 0.0;
                    let mut sum_gx = 0.0;
                    for i in 0..n {
                        let base = (i * b.channels + ch) * spatial;
                        for j in base..base + spatial {
                            let xhat = (xd[j] - mean) * inv;
                            sum_g += gd[j];
                            sum_gx += gd[j] * xhat;
                        }
                    }
                    gg[ch] = sum_gx;
                    gbeta[ch] = sum_g;
                    let out = gx.data_mut();
                    match stats {
                        Some(s) => {
                            let m = s.count as f64;
                            let k = b.gamma[ch] * inv / m;
                            for i in 0..n {
                                let base = (i * b.channels + ch) * spatial;
                                for j in base..base + spatial {
                                    let xhat = (xd[j] - mean) * inv;
                                    out[j] = k * (m * gd[j] - sum_g - xhat * sum_gx);
                                }
                            }
                        }
                        None => {
                            let k = b.gamma[ch] * inv;
                            for i in 0..n {
                                let base = (i * b.channels + ch) * spatial;
                                for j in base..base + spatial {
                                    out[j] = k * gd[j];
                                }
                            }
                        }
                    }
                }
                (gx, vec![gg, gbeta])
            }
            Layer::Relu => {
                let mut gx = grad_out.clone();
                for (g, &v) in gx.data_mut().iter_mut().zip(x.data()) {
                    if v <= 0.0 {
                        *g = 0.0;
                    }
                }
                (gx, Vec::new())
            }
            Layer::AvgPool { window } => (avgpool_backward(*window, x, grad_out), Vec::new()),
            Layer::Flatten => (
                grad_out
                    .clone()
                    .reshape(x.shape().to_vec())
                    .expect("flatten preserves element count"),
                Vec::new(),
            ),
        }
    }

    /// Parameter slices in a fixed order: weights then bias for Dense/Conv,
    /// gamma, beta, running_mean, running_var for BatchNorm.
    pub fn params(&self) -> Vec<(ParamKind, &[f64])> {
        use ParamKind::*;
        match self {
            Layer::Dense(d) => vec![(Trainable, &d.weights[..]), (Trainable, &d.bias[..])],
            Layer::Conv2d(c) => vec![(Trainable, &c.filters[..]), (Trainable, &c.bias[..])],
            Layer::BatchNorm(b) => vec![
                (Trainable, &b.gamma[..]),
                (Trainable, &b.beta[..]),
                (Buffer, &b.running_mean[..]),
                (Buffer, &b.running_var[..]),
            ],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<(ParamKind, &mut [f64])> {
        use ParamKind::*;
        match self {
            Layer::Dense(d) => vec![
                (Trainable, &mut d.weights[..]),
                (Trainable, &mut d.bias[..]),
            ],
            Layer::Conv2d(c) => vec![
                (Trainable, &mut c.filters[..]),
                (Trainable, &mut c.bias[..]),
            ],
            Layer::BatchNorm(b) => vec![
                (Trainable, &mut b.gamma[..]),
                (Trainable, &mut b.beta[..]),
                (Buffer, &mut b.running_mean[..]),
                (Buffer, &mut b.running_var[..]),
            ],
            _ => Vec::new(),
        }
    }

    pub fn trainable_len(&self) -> usize {
        self.params()
            .iter()
            .filter(|(k, _)| *k == ParamKind::Trainable)
            .map(|(_, p)| p.len())
            .sum()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn batch_stats(x: &Tensor, channels: usize, spatial: usize) -> BnStats {
    let n = x.shape()[0];
    let data = x.data();
    let count = n * spatial;
    let mut mean = vec![0.0; channels];
    let mut var = vec![0.0; channels];
    for ch in 0..channels {
        let mut s = 0.0;
        for i in 0..n {
            let base = (i * channels + ch) * spatial;
            s += data[base..base + spatial].iter().sum::<f64>();
        }
        let mu = s / count as f64;
        let mut ss = 0.0;
        for i in 0..n {
            let base = (i * channels + ch) * spatial;
            ss += data[base..base + spatial]
                .iter()
                .map(|v| (v - mu) * (v - mu))
                .sum::<f64>();
        }
        mean[ch] = mu;
        var[ch] = ss / count as f64;
    }
    BnStats { mean, var, count }
}

fn conv_forward(c: &Conv2d, x: &Tensor, out_shape: &[usize]) -> Tensor {
    let (n, h, w) = (x.shape()[0], x.shape()[2], x.shape()[3]);
    let (oh, ow) = (out_shape[2], out_shape[3]);
    let mut out = Tensor::zeros(out_shape.to_vec());
    let xd = x.data();
    let od = out.data_mut();
    let pad = c.padding as isize;
    for i in 0..n {
        for co in 0..c.out_channels {
            let obase = (i * c.out_channels + co) * oh * ow;
            let plane = &mut od[obase..obase + oh * ow];
            plane.fill(c.bias[co]);
            for ci in 0..c.in_channels {
                let xbase = (i * c.in_channels + ci) * h * w;
                let xplane = &xd[xbase..xbase + h * w];
                for ky in 0..c.kernel_h {
                    for kx in 0..c.kernel_w {
                        let wv = c.filters
                            [((co * c.in_channels + ci) * c.kernel_h + ky) * c.kernel_w + kx];
                        for oy in 0..oh {
                            let iy = (oy * c.stride + ky) as isize - pad;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let xrow = &xplane[iy as usize * w..(iy as usize + 1) * w];
                            let orow = &mut plane[oy * ow..(oy + 1) * ow];
                            for (ox, o) in orow.iter_mut().enumerate() {
                                let ix = (ox * c.stride + kx) as isize - pad;
                                if ix >= 0 && ix < w as isize {
                                    *o += wv * xrow[ix as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn conv_backward(c: &Conv2d, x: &Tensor, grad_out: &Tensor) -> (Tensor, Vec<Vec<f64>>) {
    let (n, h, w) = (x.shape()[0], x.shape()[2], x.shape()[3]);
    let (oh, ow) = (grad_out.shape()[2], grad_out.shape()[3]);
    let mut gx = Tensor::zeros(x.shape().to_vec());
    let mut gw = vec![0.0; c.filters.len()];
    let mut gb = vec![0.0; c.out_channels];
    let xd = x.data();
    let gd = grad_out.data();
    let gxd = gx.data_mut();
    let pad = c.padding as isize;
    for i in 0..n {
        for co in 0..c.out_channels {
            let gbase = (i * c.out_channels + co) * oh * ow;
            let gplane = &gd[gbase..gbase + oh * ow];
            gb[co] += gplane.iter().sum::<f64>();
            for ci in 0..c.in_channels {
                let xbase = (i * c.in_channels + ci) * h * w;
                for ky in 0..c.kernel_h {
                    for kx in 0..c.kernel_w {
                        let widx = ((co * c.in_channels + ci) * c.kernel_h + ky) * c.kernel_w + kx;
                        let wv = c.filters[widx];
                        let mut acc = 0.0;
                        for oy in 0..oh {
                            let iy = (oy * c.stride + ky) as isize - pad;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let row_base = xbase + iy as usize * w;
                            for ox in 0..ow {
                                let ix = (ox * c.stride + kx) as isize - pad;
                                if ix >= 0 && ix < w as isize {
                                    let g = gplane[oy * ow + ox];
                                    let xi = row_base + ix as usize;
                                    acc += g * xd[xi];
                                    gxd[xi] += g * wv;
                                }
                            }
                        }
                        gw[widx] += acc;
                    }
                }
            }
        }
    }
    (gx, vec![gw, gb])
}

fn avgpool_forward(window: usize, x: &Tensor, out_shape: &[usize]) -> Tensor {
    let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (oh, ow) = (out_shape[2], out_shape[3]);
    let mut out = Tensor::zeros(out_shape.to_vec());
    let scale = 1.0 / (window * window) as f64;
    let xd = x.data();
    let od = out.data_mut();
    for plane in 0..n * c {
        let xb = plane * h * w;
        let ob = plane * oh * ow;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut s = 0.0;
                for dy in 0..window {
                    let row = xb + (oy * window + dy) * w + ox * window;
                    s += xd[row..row + window].iter().sum::<f64>();
                }
                od[ob + oy * ow + ox] = s * scale;
            }
        }
    }
    out
}

fn avgpool_backward(window: usize, x: &Tensor, grad_out: &Tensor) -> Tensor {
    let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (oh, ow) = (grad_out.shape()[2], grad_out.shape()[3]);
    let mut gx = Tensor::zeros(x.shape().to_vec());
    let scale = 1.0 / (window * window) as f64;
    let gd = grad_out.data();
    let gxd = gx.data_mut();
    for plane in 0..n * c {
        let xb = plane * h * w;
        let ob = plane * oh * ow;
        for oy in 0..oh {
            for ox in 0..ow {
                let g = gd[ob + oy * ow + ox] * scale;
                for dy in 0..window {
                    let row = xb + (oy * window + dy) * w + ox * window;
                    for v in &mut gxd[row..row + window] {
                        *v += g;
                    }
                }
            }
        }
    }
    gx
}
