use terracover::data::NormalizationStats;
use terracover::nn::{ArchitectureSpec, Network, SatelliteNetOptions};
use terracover::tensor::{Fill, Tensor};
use terracover::training::{load_checkpoint, save_checkpoint, Checkpoint};
use terracover::{Error, Rng};

fn checkpoint(opts: &SatelliteNetOptions, seed: u64) -> Checkpoint {
    let mut rng = Rng::new(seed);
    let net = Network::new(&ArchitectureSpec::satellite_net(opts), &mut rng).unwrap();
    Checkpoint::new(net, NormalizationStats { mean: [0.3, 0.4, 0.5], std: [0.1, 0.2, 0.3] })
}

fn tiny() -> SatelliteNetOptions {
    SatelliteNetOptions { conv_channels: [2, 2, 3, 3], hidden_units: 5, ..Default::default() }
}

#[test]
fn default_network_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.snet");
    let c = checkpoint(&SatelliteNetOptions::default(), 4);
    save_checkpoint(&c, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    for (a, b) in c.network.params().iter().zip(back.network.params().iter()) {
        assert_eq!(a.name, b.name);
        let bits = |t: &Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.tensor), bits(&b.tensor));
    }
    let x = Tensor::random(&[3, 3, 64, 64], Fill::Gaussian { mean: 0.0, std: 1.0 }, &mut Rng::new(1)).unwrap();
    assert_eq!(c.logits(&x).unwrap(), back.logits(&x).unwrap());
    assert_eq!(back.network.params().get("bn0.running_var").unwrap().shape(), &[32]);
}

#[test]
fn every_truncation_is_reported_as_corrupt() {
    let bytes = checkpoint(&tiny(), 2).to_bytes().unwrap();
    for len in 0..bytes.len() {
        match Checkpoint::from_bytes(&bytes[..len]) {
            Err(Error::CorruptCheckpoint(_)) => {}
            other => panic!("truncation to {len} bytes gave {other:?}"),
        }
    }
    assert!(Checkpoint::from_bytes(&bytes).is_ok());
}

#[test]
fn flipped_header_bytes_never_panic() {
    let bytes = checkpoint(&tiny(), 3).to_bytes().unwrap();
    let mut rng = Rng::new(8);
    for _ in 0..300 {
        let mut b = bytes.clone();
        let i = rng.below(b.len().min(4000));
        b[i] ^= 1 << rng.below(8);
        let _ = Checkpoint::from_bytes(&b);
    }
}

#[test]
fn header_flags_mismatched_architecture() {
    let mut a = checkpoint(&tiny(), 1);
    let other = checkpoint(&SatelliteNetOptions { hidden_units: 6, ..tiny() }, 1);
    a.network = other.network;
    let mut bytes = a.to_bytes().unwrap();
    // Claim the wider layer in the header but keep the payload length: offsets no longer line up.
    let text = String::from_utf8_lossy(&bytes).into_owned();
    assert!(text.contains("\"units\":6"));
    let pos = text.find("\"units\":6").unwrap() + 8;
    bytes[pos] = b'5';
    assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::CorruptCheckpoint(_))));
}
