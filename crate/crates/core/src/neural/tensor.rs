use super::NetError;

/// A batch of 1D signals, laid out `[sample][channel][position]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub n: usize,
    pub c: usize,
    pub l: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(n: usize, c: usize, l: usize) -> Self {
        Tensor {
            n,
            c,
            l,
            data: vec![0.0; n * c * l],
        }
    }

    pub fn from_vec(n: usize, c: usize, l: usize, data: Vec<f64>) -> Result<Self, NetError> {
        if data.len() != n * c * l {
            return Err(NetError::Shape(format!(
                "{} values do not fill a {n}×{c}×{l} tensor",
                data.len()
            )));
        }
        Ok(Tensor { n, c, l, data })
    }

    /// One single-channel signal per row.
    pub fn from_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self, NetError> {
        let mut data = Vec::new();
        let mut l = None;
        let mut n = 0;
        for r in rows {
            if *l.get_or_insert(r.len()) != r.len() {
                return Err(NetError::Shape("rows differ in length".into()));
            }
            data.extend_from_slice(r);
            n += 1;
        }
        Tensor::from_vec(n, 1, l.unwrap_or(0), data)
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n, self.c, self.l)
    }

    pub fn per_sample(&self) -> usize {
        self.c * self.l
    }

    #[inline]
    pub fn at(&self, i: usize, c: usize, t: usize) -> f64 {
        self.data[(i * self.c + c) * self.l + t]
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let s = self.per_sample();
        &self.data[i * s..(i + 1) * s]
    }

    pub fn select(&self, indices: &[usize]) -> Tensor {
        let mut data = Vec::with_capacity(indices.len() * self.per_sample());
        for &i in indices {
            data.extend_from_slice(self.sample(i));
        }
        Tensor {
            n: indices.len(),
            c: self.c,
            l: self.l,
            data,
        }
    }

    /// Depth concatenation: stacks channels of equally long signals.
    pub fn concat_channels(parts: &[Tensor]) -> Result<Tensor, NetError> {
        let first = parts.first().ok_or_else(|| NetError::Shape("nothing to concatenate".into()))?;
        if parts.iter().any(|p| p.n != first.n || p.l != first.l) {
            return Err(NetError::Shape("concatenated branches differ in batch or length".into()));
        }
        if parts.len() == 1 {
            return Ok(first.clone());
        }
        let c: usize = parts.iter().map(|p| p.c).sum();
        let mut data = Vec::with_capacity(first.n * c * first.l);
        for i in 0..first.n {
            for p in parts {
                data.extend_from_slice(p.sample(i));
            }
        }
        Ok(Tensor {
            n: first.n,
            c,
            l: first.l,
            data,
        })
    }

    /// Inverse of [`concat_channels`](Self::concat_channels).
    pub fn split_channels(&self, sizes: &[usize]) -> Vec<Tensor> {
        if sizes.len() == 1 {
            return vec![self.clone()];
        }
        let mut out: Vec<Tensor> = sizes.iter().map(|&c| Tensor::zeros(self.n, c, self.l)).collect();
        for i in 0..self.n {
            let mut offset = 0;
            for (t, &c) in out.iter_mut().zip(sizes) {
                let len = c * self.l;
                let src = &self.sample(i)[offset..offset + len];
                t.data[i * len..(i + 1) * len].copy_from_slice(src);
                offset += len;
            }
        }
        out
    }
}
