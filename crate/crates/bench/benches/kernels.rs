use criterion::{black_box, criterion_group, criterion_main, Criterion};
use limstrain::potentials::{conjugate_fstar, potential_f};
use limstrain::regularized::invert_relation;
use limstrain::ConstitutiveLaw;
use limstrain_bench::tensor_samples;

fn kernels(c: &mut Criterion) {
    let samples = tensor_samples(64);
    for a in [1.0, 2.0] {
        let law = ConstitutiveLaw::prototype(a).unwrap();
        let images: Vec<_> = samples.iter().map(|t| law.eval_d(t).unwrap()).collect();
        c.bench_function(&format!("eval_d a={a}"), |b| {
            b.iter(|| {
                samples
                    .iter()
                    .map(|t| law.eval_d(black_box(t)).unwrap())
                    .collect::<Vec<_>>()
            })
        });
        c.bench_function(&format!("derivative a={a}"), |b| {
            b.iter(|| {
                samples
                    .iter()
                    .map(|t| law.derivative(black_box(t)).unwrap())
                    .collect::<Vec<_>>()
            })
        });
        c.bench_function(&format!("invert_d a={a}"), |b| {
            b.iter(|| images.iter().filter_map(|d| law.invert_d(black_box(d)).ok()).count())
        });
        c.bench_function(&format!("invert_relation n=64 a={a}"), |b| {
            b.iter(|| {
                images
                    .iter()
                    .map(|e| invert_relation(&law, black_box(e), 64).unwrap())
                    .collect::<Vec<_>>()
            })
        });
        c.bench_function(&format!("potential_f a={a}"), |b| {
            b.iter(|| {
                samples
                    .iter()
                    .map(|t| potential_f(&law, black_box(t)).unwrap())
                    .sum::<f64>()
            })
        });
        c.bench_function(&format!("conjugate_fstar a={a}"), |b| {
            b.iter(|| {
                images
                    .iter()
                    .map(|d| conjugate_fstar(&law, black_box(d)).unwrap().value)
                    .sum::<f64>()
            })
        });
    }
}

criterion_group!(benches, kernels);
criterion_main!(benches);
