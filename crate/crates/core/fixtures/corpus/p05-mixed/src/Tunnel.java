import javax.crypto.Cipher;
import javax.crypto.Mac;
import javax.crypto.SecretKey;
import javax.crypto.spec.GCMParameterSpec;

class Tunnel {
    byte[] send(SecretKey k, SecretKey mk, byte[] iv, byte[] data) throws Exception {
        Cipher cipher = Cipher.getInstance("AES/GCM/NoPadding");
        cipher.init(Cipher.ENCRYPT_MODE, k, new GCMParameterSpec(128, iv));
        byte[] ct = cipher.doFinal(data);
        Mac mac = Mac.getInstance("HmacSHA1");
        mac.init(mk);
        return mac.doFinal(ct);
    }
}
