pub mod op_gradients;
