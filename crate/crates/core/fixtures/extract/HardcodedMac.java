import javax.crypto.Mac;
import javax.crypto.spec.SecretKeySpec;

class HardcodedMac {
    static final String KEY = "hunter2";

    byte[] sign(byte[] msg) throws Exception {
        byte[] raw = { 1, 2, 3, 4, 5, 6, 7, 8 };
        SecretKeySpec key = new SecretKeySpec(raw, "HmacSHA256");
        Mac mac = Mac.getInstance("HmacSHA1");
        mac.init(key);
        return mac.doFinal(msg);
    }

    byte[] signString(byte[] msg) throws Exception {
        SecretKeySpec key = new SecretKeySpec(KEY.getBytes(), "HmacSHA256");
        Mac mac = Mac.getInstance("HmacSHA256");
        mac.init(key);
        return mac.doFinal(msg);
    }
}
