//! Filter gallery and frequency-spectrum figures.
//!
//! Learned filters live in whitened PCA coordinates; for display they are
//! pulled back to raw sample space by composing with the whitening map.
//! Galleries tile filters along x and timesteps (and channels) along y;
//! spectra show the 2-D discrete Fourier magnitude of each timestep slice,
//! zero frequency centered, log-scaled.

use super::linalg::Mat;
use super::{IsaModel, PcaModel};
use crate::error::{Error, Result};
use std::path::Path;

/// Spatial/temporal/channel layout a flat filter row reshapes to.
#[derive(Debug, Clone, Copy)]
pub struct FilterLayout {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub nc: usize,
}

impl FilterLayout {
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nt * self.nc
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Grayscale image with samples in [0, 1].
#[derive(Debug, Clone)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f32>,
}

impl GrayImage {
    fn new(width: usize, height: usize) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![0.0; width * height],
        }
    }

    fn set(&mut self, x: usize, y: usize, v: f32) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.pixels[y * self.width + x]
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    /// Binary PGM (P5).
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut buf = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        buf.extend(self.to_bytes());
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    /// 8-bit grayscale PNG.
    pub fn write_png(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut encoder = png::Encoder::new(
            std::io::BufWriter::new(file),
            self.width as u32,
            self.height as u32,
        );
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::format(path, format!("png header: {e}")))?;
        writer
            .write_image_data(&self.to_bytes())
            .map_err(|e| Error::format(path, format!("png payload: {e}")))
    }
}

/// Filters of an ISA model mapped back to raw sample space, one per row.
pub fn raw_space_filters(model: &IsaModel) -> Mat {
    model.w.matmul(&model.pca.projection_matrix())
}

/// Whitened principal directions of a PCA model, one per row.
pub fn pca_raw_filters(pca: &PcaModel) -> Mat {
    pca.projection_matrix()
}

fn check_layout(filters: &Mat, layout: FilterLayout) -> Result<()> {
    if filters.cols() != layout.len() {
        return Err(Error::ShapeMismatch {
            expected: format!(
                "filters of length {} for layout {}x{}x{}x{}",
                layout.len(),
                layout.nx,
                layout.ny,
                layout.nt,
                layout.nc
            ),
            got: format!("{}", filters.cols()),
        });
    }
    Ok(())
}

#[inline]
fn sample(filter: &[f64], layout: FilterLayout, x: usize, y: usize, t: usize, c: usize) -> f64 {
    filter[x + layout.nx * (y + layout.ny * (t + layout.nt * c))]
}

const MARGIN: usize = 1;

/// Lays out per-(filter, slice) tiles: filter index along x, timestep and
/// channel along y, min-max normalized per filter.
fn tile_grid(
    num_filters: usize,
    layout: FilterLayout,
    tile_value: impl Fn(usize, usize, usize, usize, usize) -> f64,
) -> GrayImage {
    let rows = layout.nt * layout.nc;
    let width = num_filters * (layout.nx + MARGIN) + MARGIN;
    let height = rows * (layout.ny + MARGIN) + MARGIN;
    let mut img = GrayImage::new(width, height);

    let mut values = vec![0.0f64; layout.nx * layout.ny * rows];
    for f in 0..num_filters {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut idx = 0;
        for c in 0..layout.nc {
            for t in 0..layout.nt {
                for y in 0..layout.ny {
                    for x in 0..layout.nx {
                        let v = tile_value(f, x, y, t, c);
                        lo = lo.min(v);
                        hi = hi.max(v);
                        values[idx] = v;
                        idx += 1;
                    }
                }
            }
        }
        let span = if hi > lo { hi - lo } else { 1.0 };
        let mut idx = 0;
        for row in 0..rows {
            for y in 0..layout.ny {
                for x in 0..layout.nx {
                    let v = ((values[idx] - lo) / span) as f32;
                    idx += 1;
                    let px = MARGIN + f * (layout.nx + MARGIN) + x;
                    let py = MARGIN + row * (layout.ny + MARGIN) + y;
                    img.set(px, py, v);
                }
            }
        }
    }
    img
}

/// Tiles every filter's timestep (and channel) slices into one image.
pub fn filter_gallery(filters: &Mat, layout: FilterLayout) -> Result<GrayImage> {
    check_layout(filters, layout)?;
    Ok(tile_grid(filters.rows(), layout, |f, x, y, t, c| {
        sample(filters.row(f), layout, x, y, t, c)
    }))
}

/// 2-D DFT magnitude of each timestep slice, zero frequency centered,
/// log-scaled, min-max normalized per filter.
pub fn filter_spectrum(filters: &Mat, layout: FilterLayout) -> Result<GrayImage> {
    check_layout(filters, layout)?;
    let (nx, ny) = (layout.nx, layout.ny);
    let k = filters.rows();
    let slices = layout.nt * layout.nc;
    let mut mags = vec![0.0f64; k * slices * nx * ny];
    for f in 0..k {
        let filter = filters.row(f);
        for c in 0..layout.nc {
            for t in 0..layout.nt {
                let slice_idx = c * layout.nt + t;
                for v in 0..ny {
                    for u in 0..nx {
                        let mut re = 0.0f64;
                        let mut im = 0.0f64;
                        for y in 0..ny {
                            for x in 0..nx {
                                let phase = -std::f64::consts::TAU
                                    * (u as f64 * x as f64 / nx as f64
                                        + v as f64 * y as f64 / ny as f64);
                                let s = sample(filter, layout, x, y, t, c);
                                re += s * phase.cos();
                                im += s * phase.sin();
                            }
                        }
                        // fftshift: zero frequency lands at the center
                        let su = (u + nx / 2) % nx;
                        let sv = (v + ny / 2) % ny;
                        mags[((f * slices + slice_idx) * ny + sv) * nx + su] =
                            (re * re + im * im).sqrt();
                    }
                }
            }
        }
    }
    Ok(tile_grid(k, layout, |f, x, y, t, c| {
        let slice_idx = c * layout.nt + t;
        (1.0 + mags[((f * slices + slice_idx) * ny + y) * nx + x]).ln()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_filter(values: Vec<f64>) -> Mat {
        Mat::from_vec(1, values.len(), values).unwrap()
    }

    #[test]
    fn gallery_tile_count_matches_layout() {
        let layout = FilterLayout {
            nx: 4,
            ny: 4,
            nt: 3,
            nc: 1,
        };
        let filters = Mat::zeros(5, layout.len());
        let img = filter_gallery(&filters, layout).unwrap();
        assert_eq!(img.width, 5 * (4 + MARGIN) + MARGIN);
        assert_eq!(img.height, 3 * (4 + MARGIN) + MARGIN);
    }

    #[test]
    fn constant_filter_spectrum_is_dc_only() {
        let layout = FilterLayout {
            nx: 8,
            ny: 8,
            nt: 1,
            nc: 1,
        };
        let filters = single_filter(vec![1.0; 64]);
        let img = filter_spectrum(&filters, layout).unwrap();
        // center pixel (4,4) inside the single tile carries all the energy
        let center = img.get(MARGIN + 4, MARGIN + 4);
        assert!((center - 1.0).abs() < 1e-6);
        let mut others = 0.0f32;
        for y in 0..8 {
            for x in 0..8 {
                if (x, y) != (4, 4) {
                    others = others.max(img.get(MARGIN + x, MARGIN + y));
                }
            }
        }
        assert!(others < 1e-6, "off-center energy {others}");
    }

    #[test]
    fn sinusoid_spectrum_has_symmetric_peaks() {
        let layout = FilterLayout {
            nx: 8,
            ny: 8,
            nt: 1,
            nc: 1,
        };
        let (u0, v0) = (2i32, 1i32);
        let mut values = vec![0.0f64; 64];
        for y in 0..8 {
            for x in 0..8 {
                values[y * 8 + x] = (std::f64::consts::TAU
                    * (u0 as f64 * x as f64 / 8.0 + v0 as f64 * y as f64 / 8.0))
                    .cos();
            }
        }
        let img = filter_spectrum(&single_filter(values), layout).unwrap();
        // peaks at center +- (u0, v0)
        let p1 = img.get(MARGIN + (4 + u0) as usize, MARGIN + (4 + v0) as usize);
        let p2 = img.get(MARGIN + (4 - u0) as usize, MARGIN + (4 - v0) as usize);
        assert!((p1 - 1.0).abs() < 1e-6 && (p2 - 1.0).abs() < 1e-6);
        let dc = img.get(MARGIN + 4, MARGIN + 4);
        assert!(dc < 0.1, "dc leakage {dc}");
    }

    #[test]
    fn layout_mismatch_rejected() {
        let layout = FilterLayout {
            nx: 4,
            ny: 4,
            nt: 2,
            nc: 1,
        };
        let filters = Mat::zeros(2, 31);
        assert!(filter_gallery(&filters, layout).is_err());
    }

    #[test]
    fn pgm_and_png_write(){
        let layout = FilterLayout { nx: 3, ny: 3, nt: 2, nc: 1 };
        let mut filters = Mat::zeros(2, layout.len());
        for (i, v) in filters.data_mut().iter_mut().enumerate() {
            *v = (i as f64 * 0.37).sin();
        }
        let img = filter_gallery(&filters, layout).unwrap();
        let dir = std::env::temp_dir().join("convisa_viz_test");
        std::fs::create_dir_all(&dir).unwrap();
        img.write_pgm(&dir.join("g.pgm")).unwrap();
        img.write_png(&dir.join("g.png")).unwrap();
        assert!(dir.join("g.pgm").exists() && dir.join("g.png").exists());
    }
}
