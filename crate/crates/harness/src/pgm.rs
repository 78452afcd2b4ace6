//! Portable graymaps, plain (`P2`) and raw (`P5`), 8-bit only.

use std::fs;
use std::path::Path;

use upca_core::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgmFormat {
    Plain,
    Raw,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    /// Row-major, top row first.
    pub pixels: Vec<u8>,
}

impl Pgm {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn encode(&self, format: PgmFormat) -> Vec<u8> {
        match format {
            PgmFormat::Raw => {
                let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
                out.extend_from_slice(&self.pixels);
                out
            }
            PgmFormat::Plain => {
                let mut out = format!("P2\n{} {}\n255\n", self.width, self.height);
                for row in self.pixels.chunks(self.width) {
                    let line: Vec<String> = row.iter().map(u8::to_string).collect();
                    out.push_str(&line.join(" "));
                    out.push('\n');
                }
                out.into_bytes()
            }
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut reader = Reader { bytes, pos: 0 };
        let magic = reader.token()?;
        let format = match magic.as_str() {
            "P2" => PgmFormat::Plain,
            "P5" => PgmFormat::Raw,
            other => return Err(reader.error(format!("unsupported magic {other:?}"))),
        };
        let width = reader.number()?;
        let height = reader.number()?;
        let maxval = reader.number()?;
        if maxval != 255 {
            return Err(reader.error(format!("maxval {maxval}, only 255 is supported")));
        }
        if width == 0 || height == 0 {
            return Err(reader.error("empty image".into()));
        }
        let count = width * height;
        let pixels = match format {
            PgmFormat::Raw => {
                // exactly one whitespace byte separates the header from the data
                if !reader.peek().is_some_and(|b| b.is_ascii_whitespace()) {
                    return Err(reader.error("missing separator before raster".into()));
                }
                reader.pos += 1;
                let data = &bytes[reader.pos..];
                if data.len() < count {
                    return Err(
                        reader.error(format!("raster holds {} of {count} bytes", data.len()))
                    );
                }
                data[..count].to_vec()
            }
            PgmFormat::Plain => (0..count)
                .map(|_| {
                    let v = reader.number()?;
                    u8::try_from(v).map_err(|_| reader.error(format!("sample {v} exceeds 255")))
                })
                .collect::<Result<_>>()?,
        };
        Self::new(width, height, pixels)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path)?).map_err(|e| match e {
            Error::Parse { line, msg } => Error::Parse {
                line,
                msg: format!("{}: {msg}", path.display()),
            },
            other => other,
        })
    }

    pub fn write(&self, path: &Path, format: PgmFormat) -> Result<()> {
        fs::write(path, self.encode(format))?;
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn line(&self) -> usize {
        1 + self.bytes[..self.pos.min(self.bytes.len())]
            .iter()
            .filter(|&&b| b == b'\n')
            .count()
    }

    fn error(&self, msg: String) -> Error {
        Error::Parse {
            line: self.line(),
            msg,
        }
    }

    fn skip_space(&mut self) {
        while let Some(b) = self.peek() {
            if b == b'#' {
                while self.peek().is_some_and(|b| b != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<String> {
        self.skip_space();
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|b| !b.is_ascii_whitespace() && b != b'#')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("unexpected end of file".into()));
        }
        Ok(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
    }

    fn number(&mut self) -> Result<usize> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| self.error(format!("expected a number, found {tok:?}")))
    }
}
