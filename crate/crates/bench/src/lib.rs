// benchmark support crate
