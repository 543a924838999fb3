use rand::Rng;

use crate::canproto::SourceAddress;

/// What the ECU's CPU runs around its own transmissions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProgramActivity {
    /// The same routine every time: identical activity bursts.
    Uniform,
    /// A routine picked at random per transmission: bursts with seeded random
    /// amplitude, frequency and phase.
    Heterogeneous,
}

impl std::fmt::Display for ProgramActivity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProgramActivity::Uniform => "uniform",
            ProgramActivity::Heterogeneous => "heterogeneous",
        })
    }
}

/// Payload source for a periodic message.
#[derive(Debug, Clone, PartialEq)]
pub enum PayloadGen {
    /// Uniform random bytes.
    Random,
    /// Little-endian frame counter in the first two bytes, rest `0xFF`
    /// (unused J1939 signal space).
    Counter,
    /// Random bytes where the mask is set, `0xFF` elsewhere.
    Masked(Vec<u8>),
    Constant(Vec<u8>),
}

impl PayloadGen {
    pub(crate) fn generate<R: Rng>(&self, dlc: usize, n: usize, rng: &mut R) -> Vec<u8> {
        match self {
            PayloadGen::Random => (0..dlc).map(|_| rng.random()).collect(),
            PayloadGen::Counter => {
                let c = (n as u16).to_le_bytes();
                (0..dlc).map(|i| if i < 2 { c[i] } else { 0xFF }).collect()
            }
            PayloadGen::Masked(mask) => (0..dlc)
                .map(|i| {
                    let m = mask.get(i).copied().unwrap_or(0);
                    (rng.random::<u8>() & m) | !m
                })
                .collect(),
            PayloadGen::Constant(bytes) => (0..dlc).map(|i| bytes.get(i).copied().unwrap_or(0)).collect(),
        }
    }
}

/// A periodic message an ECU emits.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageSpec {
    pub sa: SourceAddress,
    pub id: u32,
    pub dlc: usize,
    /// Seconds between requests.
    pub period: f64,
    /// First request time, seconds.
    pub offset: f64,
    /// Stop after this many requests; `None` runs until the scenario ends.
    pub count: Option<usize>,
    pub payload: PayloadGen,
}

/// Parametric power model of one ECU.
///
/// All amplitudes are in normalized power units.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    pub baseline_mean: f64,
    /// Standard deviation of the white baseline noise.
    pub noise_sigma: f64,
    /// Constant shift of the noise floor (operating-condition offset).
    pub noise_floor_offset: f64,
    /// Step height while driving the bus.
    pub signature_amplitude: f64,
    /// Exponential rise/fall time constant of the step, seconds.
    pub signature_rise: f64,
    /// Per-frame relative amplitude jitter (uniform, ±).
    pub amplitude_jitter: f64,
    /// ECU-specific harmonic riding on the transmission step, Hz.
    pub ripple_hz: f64,
    /// Relative depth of that harmonic.
    pub ripple_depth: f64,
    pub ripple_phase: f64,
    /// Relative extra draw on dominant bits while transmitting.
    pub bit_modulation: f64,
    /// Extra draw on dominant bits while receiving.
    pub reception_ripple: f64,
    pub program: ProgramActivity,
    /// Amplitude of the program activity burst around each own transmission edge.
    pub activity_amplitude: f64,
    /// Length of each activity burst, seconds.
    pub activity_span: f64,
    /// Frequency of the uniform routine's burst, Hz.
    pub activity_hz: f64,
    /// Rate of unrelated background activity bursts, Hz (0 disables).
    pub burst_rate_hz: f64,
    pub burst_amplitude: f64,
    /// Seconds.
    pub burst_duration: f64,
}

impl Default for PowerProfile {
    fn default() -> Self {
        Self {
            baseline_mean: 1.0,
            noise_sigma: 0.1,
            noise_floor_offset: 0.0,
            signature_amplitude: 1.0,
            signature_rise: 5e-6,
            amplitude_jitter: 0.02,
            ripple_hz: 100e3,
            ripple_depth: 0.2,
            ripple_phase: 0.0,
            bit_modulation: 0.3,
            reception_ripple: 0.15,
            program: ProgramActivity::Uniform,
            activity_amplitude: 0.2,
            activity_span: 200e-6,
            activity_hz: 20e3,
            burst_rate_hz: 0.0,
            burst_amplitude: 0.0,
            burst_duration: 300e-6,
        }
    }
}

/// One node on the simulated bus.
#[derive(Debug, Clone, PartialEq)]
pub struct EcuSpec {
    pub index: usize,
    pub name: String,
    /// Source addresses this ECU legitimately sends under.
    pub sas: Vec<SourceAddress>,
    pub messages: Vec<MessageSpec>,
    pub power: PowerProfile,
}

impl EcuSpec {
    pub fn owns(&self, sa: SourceAddress) -> bool {
        self.sas.contains(&sa)
    }
}
