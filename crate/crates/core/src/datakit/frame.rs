use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit image, row-major, channels interleaved (1 = gray, 3 = RGB).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl Frame {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidInput(format!("{channels} channels (expected 1 or 3)")));
        }
        let n = width as usize * height as usize * channels as usize;
        if data.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} bytes for a {width}x{height}x{channels} frame",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, channels: u8, value: u8) -> Self {
        let n = width as usize * height as usize * channels as usize;
        Self::new(width, height, channels, vec![value; n]).expect("valid by construction")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let i = self.index(x, y);
        &self.data[i..i + self.channels as usize]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: u32, y: u32) -> &mut [u8] {
        let i = self.index(x, y);
        let c = self.channels as usize;
        &mut self.data[i..i + c]
    }

    /// Replicates a gray frame into three channels; RGB frames are cloned.
    pub fn to_rgb(&self) -> Frame {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Frame::new(self.width, self.height, 3, data).expect("valid by construction")
    }

    /// Loads PNG or JPEG; anything that is not 8-bit gray becomes RGB.
    pub fn load(path: &Path) -> Result<Frame> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.into(),
            source,
        })?;
        Ok(match img {
            image::DynamicImage::ImageLuma8(g) => {
                let (w, h) = g.dimensions();
                Frame::new(w, h, 1, g.into_raw())?
            }
            other => {
                let rgb = other.to_rgb8();
                let (w, h) = rgb.dimensions();
                Frame::new(w, h, 3, rgb.into_raw())?
            }
        })
    }

    /// Writes a lossless PNG.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let color = if self.channels == 1 {
            image::ExtendedColorType::L8
        } else {
            image::ExtendedColorType::Rgb8
        };
        image::save_buffer_with_format(path, &self.data, self.width, self.height, color, image::ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: path.into(),
                source,
            })
    }
}

/// Reads only the image header.
pub fn image_dimensions(path: &Path) -> Result<(u32, u32)> {
    image::image_dimensions(path).map_err(|source| Error::Image {
        path: path.into(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        for ch in [1u8, 3] {
            let data: Vec<u8> = (0..5 * 4 * ch as usize).map(|i| (i * 37 % 256) as u8).collect();
            let f = Frame::new(5, 4, ch, data).unwrap();
            let p = dir.path().join(format!("f{ch}.png"));
            f.save_png(&p).unwrap();
            assert_eq!(Frame::load(&p).unwrap(), f);
            assert_eq!(image_dimensions(&p).unwrap(), (5, 4));
        }
    }

    #[test]
    fn validation() {
        assert!(Frame::new(2, 2, 2, vec![0; 8]).is_err());
        assert!(Frame::new(2, 2, 1, vec![0; 3]).is_err());
        assert_eq!(Frame::filled(2, 1, 1, 9).to_rgb().data(), &[9; 6]);
    }
}
