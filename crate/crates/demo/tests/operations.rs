use jcone_demo::{lorenz_report, lorenz_star, operator_report, operator_report_js};

#[test]
fn diagonal_operator_report() {
    let v = operator_report("[[-1,0],[0,1]]", "[[0.5,0],[0,2]]", 1).unwrap();
    assert_eq!(v["level"], "StrictlySeparated");
    assert_eq!(v["index"], 1);
    assert!((v["polar"]["r_minus"][0].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((v["polar"]["r_plus"][0].as_f64().unwrap() - 2.0).abs() < 1e-12);
    let rays = v["rays"].as_array().unwrap();
    assert_eq!(rays.len(), 72);
    // every positive direction lands strictly inside the positive cone
    for r in rays.iter().filter(|r| r["jv"].as_f64().unwrap() >= 0.0) {
        assert!(r["jimage"].as_f64().unwrap() > 0.0, "{r}");
    }
}

#[test]
fn bad_input_is_reported_not_thrown() {
    let text = operator_report_js("[[1,0]]", "[[1]]", 0);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["error"].as_str().unwrap().contains("square"));
    assert!(operator_report("[[-1,0],[0,1]]", "[[1,0,0],[0,1,0],[0,0,1]]", 0).is_err());
}

#[test]
fn lorenz_spectrum_sums_to_the_divergence() {
    let v = lorenz_report(10.0, 28.0, 8.0 / 3.0, 300.0, 3).unwrap();
    let chi: Vec<f64> = serde_json::from_value(v["exponents"].clone()).unwrap();
    assert!((chi.iter().sum::<f64>() + 41.0 / 3.0).abs() < 1e-6, "{chi:?}");
    assert!(chi[0] > 0.7 && chi[0] < 1.1 && chi[1].abs() < 0.05, "{chi:?}");
    assert!(v["trajectory"].as_array().unwrap().len() > 1000);
    assert!(v["history"].as_array().unwrap().len() <= 401);
}

#[test]
fn classic_lorenz_star_passes() {
    let v = lorenz_star(10.0, 28.0, 8.0 / 3.0).unwrap();
    assert_eq!(v["certificate"]["verdict"], "Pass", "{v}");
    assert_eq!(v["certificate"]["elements"].as_array().unwrap().len(), 4);
    assert_eq!(v["orbit"]["index"], 1);
}
