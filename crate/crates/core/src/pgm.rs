//! Portable graymap masks, plain (P2) and binary (P5).

use crate::domain::MaskRaster;
use crate::error::{Result, ZenoError};
use crate::grid::{Axis, Grid};

#[derive(Clone, Debug, PartialEq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major, row 0 at the top of the image.
    pub pixels: Vec<u16>,
}

fn header_tokens(bytes: &[u8], count: usize) -> Result<(Vec<String>, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while out.len() < count {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(ZenoError::Pgm("truncated header".into()));
        }
        out.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    Ok((out, i))
}

impl Pgm {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let (tok, end) = header_tokens(bytes, 4)?;
        let num = |s: &str, what: &str| -> Result<usize> {
            s.parse::<usize>().map_err(|_| ZenoError::Pgm(format!("bad {what}: {s:?}")))
        };
        let width = num(&tok[1], "width")?;
        let height = num(&tok[2], "height")?;
        let maxval = num(&tok[3], "maxval")?;
        if width == 0 || height == 0 {
            return Err(ZenoError::Pgm("empty image".into()));
        }
        if maxval == 0 || maxval > 65535 {
            return Err(ZenoError::Pgm(format!("maxval {maxval} out of range")));
        }
        let n = width * height;
        let pixels = match tok[0].as_str() {
            "P2" => {
                let text = String::from_utf8_lossy(&bytes[end..]);
                let vals: Vec<u16> = text
                    .lines()
                    .map(|l| l.split('#').next().unwrap_or(""))
                    .flat_map(|l| l.split_whitespace().map(str::to_owned).collect::<Vec<_>>())
                    .map(|s| s.parse::<u16>().map_err(|_| ZenoError::Pgm(format!("bad pixel {s:?}"))))
                    .collect::<Result<_>>()?;
                if vals.len() < n {
                    return Err(ZenoError::Pgm(format!("expected {n} pixels, found {}", vals.len())));
                }
                vals[..n].to_vec()
            }
            "P5" => {
                let data = &bytes[(end + 1).min(bytes.len())..];
                let wide = maxval > 255;
                let need = if wide { 2 * n } else { n };
                if data.len() < need {
                    return Err(ZenoError::Pgm(format!("expected {need} data bytes, found {}", data.len())));
                }
                if wide {
                    data[..need].chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
                } else {
                    data[..n].iter().map(|&b| b as u16).collect()
                }
            }
            m => return Err(ZenoError::Pgm(format!("unsupported magic {m:?}"))),
        };
        if pixels.iter().any(|&p| p as usize > maxval) {
            return Err(ZenoError::Pgm("pixel exceeds maxval".into()));
        }
        Ok(Pgm { width, height, maxval: maxval as u16, pixels })
    }

    /// Binary (P5) encoding with 8-bit samples when possible.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        if self.maxval > 255 {
            self.pixels.iter().for_each(|p| out.extend_from_slice(&p.to_be_bytes()));
        } else {
            out.extend(self.pixels.iter().map(|&p| p as u8));
        }
        out
    }

    /// Nonzero pixels are interior. Image columns
    /// map to axis 0 and rows to axis 1, with the bottom row at `origin[1]`.
    pub fn to_mask(&self, origin: [f64; 2], spacing: f64) -> Result<MaskRaster> {
        let grid = Grid::new(vec![
            Axis::new(origin[0], spacing, self.width)?,
            Axis::new(origin[1], spacing, self.height)?,
        ])?;
        let mut inside = vec![false; grid.len()];
        for row in 0..self.height {
            for col in 0..self.width {
                let v = self.pixels[row * self.width + col];
                let iy = self.height - 1 - row;
                inside[grid.ravel(&[col, iy])] = v != 0;
            }
        }
        Ok(MaskRaster { grid, inside })
    }

    pub fn from_mask(mask: &MaskRaster) -> Result<Self> {
        if mask.grid.dim() != 2 {
            return Err(ZenoError::Pgm("only 2D masks can be written as PGM".into()));
        }
        let (w, h) = (mask.grid.axis(0).points, mask.grid.axis(1).points);
        let mut pixels = vec![0u16; w * h];
        for row in 0..h {
            for col in 0..w {
                if mask.inside[mask.grid.ravel(&[col, h - 1 - row])] {
                    pixels[row * w + col] = 255;
                }
            }
        }
        Ok(Pgm { width: w, height: h, maxval: 255, pixels })
    }
}
