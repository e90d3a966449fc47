# vim: ts=4 et sw=4 sts=4 :

import logging

from patchcir import analytic
from patchcir.homogenization import capacitanceFor, effectiveRate
from patchcir.numerics import QuadratureSpec
from patchcir.types import ModelTag, ParameterError

logger = logging.getLogger("models")


class ChannelModel:
    """Puts the PTFR, PTAR and MTAR channels behind one interface.

    The effective rate and the release series are computed once per
    instance.
    """

    def __init__(self, tag, params, layout=None, tx=None, n_max=100, root_tol=1e-10, quadrature=None):
        self.m_tag = tag
        self.m_params = params
        self.m_layout = layout
        self.m_tx = tx
        self.m_n_max = int(n_max)
        self.m_root_tol = root_tol
        self.m_quadrature = quadrature if quadrature else QuadratureSpec()
        self.m_rate = None
        self.m_profile = None

        if tag != ModelTag.PTFR and layout is None:
            raise ParameterError("{} needs a patch layout".format(tag.value))
        if tag == ModelTag.MTAR:
            if tx is None or tx.isPoint():
                raise ParameterError("MTAR needs a membrane fusion TX")
            params.checkFusionGeometry(tx.getTxRadius())

    def getTag(self):
        return self.m_tag

    def getParams(self):
        return self.m_params

    def getLayout(self):
        return self.m_layout

    def getTx(self):
        return self.m_tx

    def getEffectiveRate(self):
        if self.m_tag == ModelTag.PTFR:
            return None
        if self.m_rate is None:
            cap = capacitanceFor(self.m_layout)
            self.m_rate = effectiveRate(cap, self.m_params.getDiffusion(), self.m_params.getRxRadius())
            logger.debug("{}: G_p = {:.6f} um, w_e = {:.6f} um/s".format(
                self.m_tag.value, cap.getValue(), self.m_rate.getRate())
            )
        return self.m_rate

    def getReleaseProfile(self):
        if self.m_tag != ModelTag.MTAR:
            return None
        if self.m_profile is None:
            profile = analytic.releaseProfile(self.m_tx, self.m_n_max, self.m_root_tol)
            profile.checkAccuracy(self.m_quadrature.getRelTol())
            self.m_profile = profile
        return self.m_profile

    def getMoleculeCount(self, point_molecules=None):
        """N_T: molecules released for a 1 bit."""
        if self.m_tx is not None:
            return self.m_tx.getMoleculeCount()
        if point_molecules is None:
            raise ParameterError("molecule count of the point TX is unknown")
        return int(point_molecules)

    def _rate(self):
        return self.getEffectiveRate().getRate()

    def hittingRate(self, t):
        if self.m_tag == ModelTag.PTFR:
            return analytic.hAbsorbing(t, self.m_params)
        elif self.m_tag == ModelTag.PTAR:
            return analytic.hUniform(t, self._rate(), self.m_params)
        return analytic.hMf(t, self._rate(), self.m_params, self.getReleaseProfile(), self.m_quadrature)

    def cumulative(self, t):
        if self.m_tag == ModelTag.PTFR:
            return analytic.HAbsorbing(t, self.m_params)
        elif self.m_tag == ModelTag.PTAR:
            return analytic.HUniform(t, self._rate(), self.m_params)
        return analytic.HMf(t, self._rate(), self.m_params, self.getReleaseProfile(), self.m_quadrature)

    def asymptote(self):
        if self.m_tag == ModelTag.PTFR:
            return analytic.HAbsorbingInf(self.m_params)
        elif self.m_tag == ModelTag.PTAR:
            return analytic.HUniformInf(self._rate(), self.m_params)
        return analytic.HMfInf(self._rate(), self.m_params, self.m_tx.getTxRadius())

    def cir(self, times):
        if self.m_tag == ModelTag.PTFR:
            return analytic.cirPtfr(times, self.m_params)
        cap = self.getEffectiveRate().getCapacitance()
        if self.m_tag == ModelTag.PTAR:
            return analytic.cirPointAp(times, self.m_layout, self.m_params, cap)
        return analytic.cirMfAp(
            times, self.m_layout, self.m_params, self.m_tx,
            self.m_n_max, self.m_root_tol, self.m_quadrature, cap
        )
