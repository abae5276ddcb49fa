use std::io::Cursor;

use super::ClientError;

pub const EXPECTED_SAMPLE_RATE: u32 = 16_000;
pub const EXPECTED_CHANNELS: u16 = 1;
pub const EXPECTED_BITS: u16 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AudioFormat {
    Wav,
}

/// Raw audio bytes plus the declared container format.
#[derive(Debug, Clone)]
pub struct AudioInput {
    pub bytes: Vec<u8>,
    pub format: AudioFormat,
}

impl AudioInput {
    pub fn wav(bytes: impl Into<Vec<u8>>) -> Self {
        Self { bytes: bytes.into(), format: AudioFormat::Wav }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavInfo {
    pub sample_rate: u32,
    pub channels: u16,
    pub bits_per_sample: u16,
    pub duration_s: f64,
}

fn expected() -> String {
    format!(
        "expected WAV, PCM {EXPECTED_BITS}-bit integer, {EXPECTED_CHANNELS} channel, {EXPECTED_SAMPLE_RATE} Hz"
    )
}

/// Accepts only 16 kHz mono 16-bit integer PCM WAV. Nothing is resampled.
pub fn validate_wav(bytes: &[u8]) -> Result<WavInfo, ClientError> {
    let reader = hound::WavReader::new(Cursor::new(bytes))
        .map_err(|e| ClientError::Format(format!("{e}; {}", expected())))?;
    let spec = reader.spec();
    let ok = spec.sample_format == hound::SampleFormat::Int
        && spec.bits_per_sample == EXPECTED_BITS
        && spec.channels == EXPECTED_CHANNELS
        && spec.sample_rate == EXPECTED_SAMPLE_RATE;
    if !ok {
        return Err(ClientError::Format(format!(
            "got {} Hz, {} channel(s), {}-bit {:?}; {}",
            spec.sample_rate,
            spec.channels,
            spec.bits_per_sample,
            spec.sample_format,
            expected()
        )));
    }
    Ok(WavInfo {
        sample_rate: spec.sample_rate,
        channels: spec.channels,
        bits_per_sample: spec.bits_per_sample,
        duration_s: f64::from(reader.duration()) / f64::from(spec.sample_rate),
    })
}

#[cfg(test)]
pub(crate) fn synth_wav(sample_rate: u32, channels: u16, samples_per_channel: u32) -> Vec<u8> {
    let spec = hound::WavSpec { channels, sample_rate, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
    let mut buf = Cursor::new(Vec::new());
    {
        let mut w = hound::WavWriter::new(&mut buf, spec).unwrap();
        for i in 0..samples_per_channel * u32::from(channels) {
            w.write_sample((i % 200) as i16 - 100).unwrap();
        }
        w.finalize().unwrap();
    }
    buf.into_inner()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_contract_format() {
        let info = validate_wav(&synth_wav(16_000, 1, 8_000)).unwrap();
        assert_eq!(info.duration_s, 0.5);
    }

    #[test]
    fn rejects_cd_stereo() {
        let err = validate_wav(&synth_wav(44_100, 2, 100)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("16000 Hz") && msg.contains("44100"), "{msg}");
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(validate_wav(b"{\"text\": 1}"), Err(ClientError::Format(_))));
    }
}
