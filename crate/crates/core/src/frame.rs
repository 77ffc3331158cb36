//! Quantized single-frame encoding of approximation terms.
//!
//! Every control message is one 8-byte data payload plus a header byte that
//! selects the function form. Sequential references additionally carry the
//! target module in the message identifier (`seq_id`), never in the payload.
//!
//! Payload layouts (byte offsets, little-endian, reserved bytes are zero):
//!
//! ```text
//! header 0x01 DCT   a:u16 @0   t:u8 @2                      reserved 3..8
//! header 0x02 MP    a:u16 @0   s:u16 @2  p:u8 @4  k:u8 @5  φ:u8 @6   reserved 7
//! header 0x03 RBF   a:u16 @0   σ:u8 @2   dx:u16 @3  dy:u16 @5        reserved 7
//! header 0x04 WAVE  k:u16 @0   a:u16 @2  b:u16 @4                    reserved 6..8
//! header 0x05 SEQ   h:u16 @0                                         reserved 2..8
//! ```
//!
//! Field ranges scale with the module count `N` and stroke; see
//! [`QuantSpec::new`].

use std::f64::consts::PI;

use crate::approx::{
    ApproxError, DctTerm, FunctionForm, MpAtom, RbfTerm, SeqRef, Term, WavePair,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FrameError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

impl From<ApproxError> for FrameError {
    fn from(e: ApproxError) -> Self {
        FrameError::Protocol(e.to_string())
    }
}

pub const PAYLOAD_LEN: usize = 8;

/// How values outside a field's range are brought back into it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Clamp to `[min, max]`.
    Linear,
    /// Clamp to `[min + step, max]`; code 0 is never produced.
    Positive,
    /// Wrap into `[min, max)`; the top code aliases code 0.
    Periodic,
}

/// Uniform quantizer: `2^bits` codes spread over `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantField {
    pub bits: u32,
    pub min: f64,
    pub max: f64,
    pub kind: FieldKind,
}

impl QuantField {
    pub const fn new(bits: u32, min: f64, max: f64, kind: FieldKind) -> Self {
        QuantField {
            bits,
            min,
            max,
            kind,
        }
    }

    pub fn top_code(&self) -> u32 {
        (1u32 << self.bits) - 1
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / f64::from(self.top_code())
    }

    /// The value actually represented after range handling.
    pub fn clamp(&self, value: f64) -> f64 {
        match self.kind {
            FieldKind::Linear => value.clamp(self.min, self.max),
            FieldKind::Positive => value.clamp(self.min + self.step(), self.max),
            FieldKind::Periodic => self.min + (value - self.min).rem_euclid(self.max - self.min),
        }
    }

    pub fn quantize(&self, value: f64) -> Result<u32, FrameError> {
        if !value.is_finite() {
            return Err(FrameError::InvalidInput(format!(
                "cannot quantize non-finite value {value}"
            )));
        }
        let top = self.top_code();
        let code = ((self.clamp(value) - self.min) / self.step()).round() as u32;
        Ok(match self.kind {
            FieldKind::Periodic if code >= top => 0,
            _ => code.min(top),
        })
    }

    pub fn dequantize(&self, code: u32) -> f64 {
        let code = code.min(self.top_code());
        match self.kind {
            FieldKind::Periodic if code == self.top_code() => self.min,
            _ => self.min + f64::from(code) * self.step(),
        }
    }

    /// `|dequantize(quantize(v)) − clamp(v)|`, measured around the circle for
    /// periodic fields.
    pub fn round_trip_error(&self, value: f64) -> Result<f64, FrameError> {
        let back = self.dequantize(self.quantize(value)?);
        let diff = (back - self.clamp(value)).abs();
        Ok(match self.kind {
            FieldKind::Periodic => diff.min((self.max - self.min) - diff),
            _ => diff,
        })
    }
}

/// Free-function form of [`QuantField::quantize`].
pub fn quantize(value: f64, field: &QuantField) -> Result<u32, FrameError> {
    field.quantize(value)
}

/// Shared constants the sender and every module agree on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameContext {
    pub n_total: usize,
    pub stroke_mm: f64,
}

impl FrameContext {
    pub fn new(n_total: usize, stroke_mm: f64) -> Self {
        FrameContext { n_total, stroke_mm }
    }

    pub fn spec(&self) -> QuantSpec {
        QuantSpec::new(self.n_total, self.stroke_mm)
    }
}

/// Per-field quantizers for every frame layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantSpec {
    pub mp_amplitude: QuantField,
    pub mp_scale: QuantField,
    pub mp_position: QuantField,
    pub mp_frequency: QuantField,
    pub mp_phase: QuantField,
    pub dct_amplitude: QuantField,
    pub rbf_amplitude: QuantField,
    pub rbf_width: QuantField,
    pub rbf_center: QuantField,
    pub wave_wavevector: QuantField,
    pub wave_amplitude: QuantField,
    pub seq_height: QuantField,
}

impl QuantSpec {
    pub fn new(n_total: usize, stroke_mm: f64) -> Self {
        use FieldKind::*;
        let n = n_total as f64;
        QuantSpec {
            mp_amplitude: QuantField::new(16, -2.0, 2.0, Linear),
            mp_scale: QuantField::new(16, 0.0, 2.0 * n, Positive),
            mp_position: QuantField::new(8, 0.0, n, Periodic),
            mp_frequency: QuantField::new(8, 0.0, n / 2.0, Linear),
            mp_phase: QuantField::new(8, 0.0, 2.0 * PI, Periodic),
            dct_amplitude: QuantField::new(16, -2.0, 2.0, Linear),
            rbf_amplitude: QuantField::new(16, 0.0, 2.0, Linear),
            rbf_width: QuantField::new(8, 0.0, 2.0 * n, Positive),
            rbf_center: QuantField::new(16, -n, 2.0 * n, Linear),
            wave_wavevector: QuantField::new(16, 0.0, PI, Linear),
            wave_amplitude: QuantField::new(16, -1.0, 1.0, Linear),
            seq_height: QuantField::new(16, 0.0, stroke_mm, Linear),
        }
    }
}

/// Wire header byte for each function form.
pub fn header_byte(form: FunctionForm) -> u8 {
    match form {
        FunctionForm::Dct => 0x01,
        FunctionForm::Mp => 0x02,
        FunctionForm::Rbf => 0x03,
        FunctionForm::Wave => 0x04,
        FunctionForm::Seq => 0x05,
    }
}

/// One control message as it appears on the bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Frame {
    pub header: u8,
    pub payload: [u8; PAYLOAD_LEN],
    /// Target module of a sequential reference (the message identifier).
    pub seq_id: Option<u16>,
}

impl Frame {
    pub fn new(header: u8, payload: [u8; PAYLOAD_LEN], seq_id: Option<u16>) -> Self {
        Frame {
            header,
            payload,
            seq_id,
        }
    }

    pub fn form(&self) -> Result<FunctionForm, FrameError> {
        FunctionForm::ALL
            .into_iter()
            .find(|f| header_byte(*f) == self.header)
            .ok_or_else(|| FrameError::Protocol(format!("unknown header byte {:#04x}", self.header)))
    }

    /// Header followed by the payload.
    pub fn to_bytes(&self) -> [u8; PAYLOAD_LEN + 1] {
        let mut out = [0u8; PAYLOAD_LEN + 1];
        out[0] = self.header;
        out[1..].copy_from_slice(&self.payload);
        out
    }
}

struct Writer {
    buf: [u8; PAYLOAD_LEN],
    at: usize,
}

impl Writer {
    fn new() -> Self {
        Writer {
            buf: [0; PAYLOAD_LEN],
            at: 0,
        }
    }

    fn put(&mut self, field: &QuantField, value: f64) -> Result<(), FrameError> {
        let code = field.quantize(value)?;
        match field.bits {
            8 => self.raw_u8(code as u8),
            _ => {
                self.buf[self.at..self.at + 2].copy_from_slice(&(code as u16).to_le_bytes());
                self.at += 2;
            }
        }
        Ok(())
    }

    fn raw_u8(&mut self, v: u8) {
        self.buf[self.at] = v;
        self.at += 1;
    }
}

struct Reader<'a> {
    buf: &'a [u8; PAYLOAD_LEN],
    at: usize,
}

impl Reader<'_> {
    fn get(&mut self, field: &QuantField) -> f64 {
        let code = match field.bits {
            8 => u32::from(self.raw_u8()),
            _ => {
                let v = u16::from_le_bytes([self.buf[self.at], self.buf[self.at + 1]]);
                self.at += 2;
                u32::from(v)
            }
        };
        field.dequantize(code)
    }

    fn raw_u8(&mut self) -> u8 {
        let v = self.buf[self.at];
        self.at += 1;
        v
    }
}

/// Packs one DCT, MP, RBF or WAVE term into a frame, clamping every field
/// into its range. SEQ references go through [`encode_seq_ref`].
pub fn encode_term(term: &Term, ctx: &FrameContext) -> Result<Frame, FrameError> {
    let spec = ctx.spec();
    let mut w = Writer::new();
    match term {
        Term::Dct(t) => {
            if t.index >= ctx.n_total || t.index > usize::from(u8::MAX) {
                return Err(FrameError::InvalidInput(format!(
                    "DCT index {} does not fit N = {} in 8 bits",
                    t.index, ctx.n_total
                )));
            }
            w.put(&spec.dct_amplitude, t.amplitude)?;
            w.raw_u8(t.index as u8);
        }
        Term::Mp(a) => {
            w.put(&spec.mp_amplitude, a.amplitude)?;
            w.put(&spec.mp_scale, a.scale)?;
            w.put(&spec.mp_position, a.position)?;
            w.put(&spec.mp_frequency, a.frequency)?;
            w.put(&spec.mp_phase, a.phase)?;
        }
        Term::Rbf(r) => {
            w.put(&spec.rbf_amplitude, r.amplitude)?;
            w.put(&spec.rbf_width, r.width)?;
            w.put(&spec.rbf_center, r.center_x)?;
            w.put(&spec.rbf_center, r.center_y)?;
        }
        Term::Wave(p) => {
            w.put(&spec.wave_wavevector, p.wavevector)?;
            w.put(&spec.wave_amplitude, p.cos_amp)?;
            w.put(&spec.wave_amplitude, p.sin_amp)?;
        }
        Term::Seq(_) => {
            return Err(FrameError::InvalidInput(
                "sequential references are encoded with encode_seq_ref".into(),
            ))
        }
    }
    Ok(Frame::new(header_byte(term.form()), w.buf, None))
}

/// Addressed reference height for module `module_index`.
pub fn encode_seq_ref(module_index: usize, h_mm: f64, ctx: &FrameContext) -> Result<Frame, FrameError> {
    if module_index >= ctx.n_total || module_index > usize::from(u16::MAX) {
        return Err(FrameError::InvalidInput(format!(
            "module {module_index} outside 0..{}",
            ctx.n_total
        )));
    }
    let mut w = Writer::new();
    w.put(&ctx.spec().seq_height, h_mm)?;
    Ok(Frame::new(
        header_byte(FunctionForm::Seq),
        w.buf,
        Some(module_index as u16),
    ))
}

/// Inverse of the field packing; reals come back at their bin values.
pub fn decode_frame(frame: &Frame, ctx: &FrameContext) -> Result<Term, FrameError> {
    let spec = ctx.spec();
    let mut r = Reader {
        buf: &frame.payload,
        at: 0,
    };
    let term = match frame.form()? {
        FunctionForm::Dct => {
            let amplitude = r.get(&spec.dct_amplitude);
            let index = usize::from(r.raw_u8());
            if index >= ctx.n_total {
                return Err(FrameError::Protocol(format!(
                    "DCT index {index} outside 0..{}",
                    ctx.n_total
                )));
            }
            Term::Dct(DctTerm { index, amplitude })
        }
        FunctionForm::Mp => {
            let amplitude = r.get(&spec.mp_amplitude);
            let scale = r.get(&spec.mp_scale);
            let position = r.get(&spec.mp_position);
            let frequency = r.get(&spec.mp_frequency);
            let phase = r.get(&spec.mp_phase);
            Term::Mp(MpAtom::new(
                amplitude,
                scale,
                position,
                frequency,
                phase,
                ctx.n_total,
            )?)
        }
        FunctionForm::Rbf => {
            let amplitude = r.get(&spec.rbf_amplitude);
            let width = r.get(&spec.rbf_width);
            if width <= 0.0 {
                return Err(FrameError::Protocol("RBF width code 0".into()));
            }
            Term::Rbf(RbfTerm {
                amplitude,
                width,
                center_x: r.get(&spec.rbf_center),
                center_y: r.get(&spec.rbf_center),
            })
        }
        FunctionForm::Wave => Term::Wave(WavePair {
            wavevector: r.get(&spec.wave_wavevector),
            cos_amp: r.get(&spec.wave_amplitude),
            sin_amp: r.get(&spec.wave_amplitude),
        }),
        FunctionForm::Seq => {
            let module = frame
                .seq_id
                .ok_or_else(|| FrameError::Protocol("SEQ frame without identifier".into()))?;
            Term::Seq(SeqRef {
                module: usize::from(module),
                height: r.get(&spec.seq_height),
            })
        }
    };
    Ok(term)
}

/// Encodes any term; SEQ terms are routed to [`encode_seq_ref`].
pub fn encode_any(term: &Term, ctx: &FrameContext) -> Result<Frame, FrameError> {
    match term {
        Term::Seq(s) => encode_seq_ref(s.module, s.height, ctx),
        other => encode_term(other, ctx),
    }
}
