#[path = "support/model_gradients.rs"]
mod checks;

#[test]
fn conv1d_model_gradients() {
    checks::conv1d_model_gradients();
}

#[test]
fn conv2d_model_gradients() {
    checks::conv2d_model_gradients();
}

#[test]
fn attn_gru_model_gradients() {
    checks::attn_gru_model_gradients();
}
