//! Seven-way query intent classification.

pub mod features;
pub mod model;

pub use features::{featurize_intent, IntentFeatures, INTENT_FEATURES};
pub use model::{
    accuracy, argmax, IntentBaseline, IntentClassifier, IntentConfig, IntentEncoder, IntentModel, INTENT_CLASSES,
};
