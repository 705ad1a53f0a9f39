"""Learning-curve forecasting for mobile-phone attribute inference."""
