"""Photon scattering amplitudes for emitters side-coupled to a chiral waveguide."""
