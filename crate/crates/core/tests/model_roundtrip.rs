use trace_auth::evaluation::make_windows;
use trace_auth::geo::resample;
use trace_auth::io::{load_model, save_model};
use trace_auth::pipeline::{PipelineConfig, UserModel};
use trace_auth::synth::{synth_generate, SynthConfig};
use trace_auth::verifier::{HmmConfig, Method};

#[test]
fn saved_models_score_bit_identically() {
    let traces = synth_generate(&SynthConfig::scenario(2, 2, 11)).unwrap();
    let config = PipelineConfig {
        hmm: HmmConfig {
            max_iters: 25,
            ..HmmConfig::default()
        },
        ..PipelineConfig::default()
    };
    let own = resample(&traces[0], &config.resample).unwrap();
    let other = resample(&traces[1], &config.resample).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for method in Method::ALL {
        let model = UserModel::train(&own, method, &config).unwrap();
        let path = dir.path().join(format!("{method}.model"));
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, model);
        for trace in [&own, &other] {
            let symbols = back.encode(trace).symbols();
            assert_eq!(symbols, model.encode(trace).symbols());
            for w in make_windows(&symbols, 16, 7).unwrap() {
                assert_eq!(
                    back.score(w).unwrap().to_bits(),
                    model.score(w).unwrap().to_bits(),
                    "{method}"
                );
            }
        }
    }
}
