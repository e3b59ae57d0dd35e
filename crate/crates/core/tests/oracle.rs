use ghzsim_core::circuit::{self, lossless_mode_unitary, oracle_amplitude, Element, Netlist};
use ghzsim_core::fock::{make_basis_state, Channel, ModeKey, Polarization};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_netlist(rng: &mut ChaCha8Rng, channels: u16) -> Netlist {
    let names = (0..channels).map(|c| format!("m{c}")).collect();
    let mut n = Netlist::new(names, vec![], vec![]);
    for _ in 0..rng.gen_range(3..14) {
        let a = Channel(rng.gen_range(0..channels));
        if rng.gen_bool(0.5) {
            n.push(Element::Waveplate { channel: a, angle: rng.gen_range(-3.2..3.2) });
        } else {
            let mut b = Channel(rng.gen_range(0..channels - 1));
            if b.0 >= a.0 {
                b.0 += 1;
            }
            let (out1, out2) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
            n.push(Element::Pbs { in1: a, in2: b, out1, out2 });
        }
    }
    n
}

fn random_photons(rng: &mut ChaCha8Rng, channels: u16) -> Vec<ModeKey> {
    (0..rng.gen_range(1..=4))
        .map(|_| {
            let pol = if rng.gen_bool(0.5) { Polarization::H } else { Polarization::V };
            ModeKey::new(Channel(rng.gen_range(0..channels)), pol, rng.gen_range(0..3))
        })
        .collect()
}

#[test]
fn stepper_agrees_with_permanents() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a2f);
    let mut worst: f64 = 0.0;
    for _ in 0..150 {
        let channels = rng.gen_range(2..=5);
        let n = random_netlist(&mut rng, channels);
        let input = make_basis_state(&random_photons(&mut rng, channels)).unwrap();
        let out = circuit::run(&n, &input, &[]).unwrap();
        let u = lossless_mode_unitary(&n);
        assert!(u.unitarity_error() < 1e-12);
        let basis = input.terms()[0].0;
        let mut mass = 0.0;
        for &(b, amp) in out.iter() {
            let oracle = oracle_amplitude(&u, &basis, &b);
            worst = worst.max((oracle - amp).norm());
            mass += oracle.norm_sqr();
        }
        // the stepper's support carries all of the oracle's probability
        assert!((mass - 1.0).abs() < 1e-9, "missing mass {}", 1.0 - mass);
    }
    assert!(worst < 1e-9, "max deviation {worst:e}");
}

#[test]
fn canonical_circuit_agrees_with_permanents() {
    let n = ghzsim_core::canonical_ghz_netlist();
    let u = lossless_mode_unitary(&n);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let sources = n.sources.clone();
        let photons: Vec<ModeKey> = sources
            .iter()
            .map(|&c| {
                let pol = if rng.gen_bool(0.5) { Polarization::H } else { Polarization::V };
                ModeKey::new(c, pol, rng.gen_range(0..2))
            })
            .collect();
        let input = make_basis_state(&photons).unwrap();
        let out = circuit::run(&n, &input, &[]).unwrap();
        for &(b, amp) in out.iter() {
            assert!((oracle_amplitude(&u, &input.terms()[0].0, &b) - amp).norm() < 1e-9);
        }
    }
}
